#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Setup dot py."""
from os.path import dirname, join

from setuptools import find_packages, setup


def read(*names, **kwargs):
    """Read description files."""
    path = join(dirname(__file__), *names)
    with open(path, encoding=kwargs.get('encoding', 'utf8')) as fh:
        return fh.read()


long_description = '{}\n{}'.format(
    read('README.rst'),
    read(join('docs', 'CHANGELOG.rst')),
    )

setup(
    name='nbelnet',
    version='0.1.0',
    description='Elastic-net negative binomial regression with checks of '
                'its oracle inequalities and selection guarantees',
    long_description=long_description,
    long_description_content_type='text/x-rst',
    license='Apache License, version 2.0',
    author='The nbelnet developers',
    packages=find_packages('src'),
    package_dir={'': 'src'},
    include_package_data=True,
    zip_safe=True,
    classifiers=[
        # complete classifier list:
        # http://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'License :: OSI Approved :: Apache Software License',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Scientific/Engineering',
        ],
    keywords=[
        'negative binomial', 'elastic net', 'count regression',
        'high-dimensional statistics', 'variable selection', 'lasso'
        ],
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.21',
        'scipy>=1.7',
        'pandas>=1.3',
        'scikit-learn>=1.0',
        'statsmodels>=0.13',
        ],
    extras_require={
            'tests': [
                'pytest>=7',
                'hypothesis>=6',
            ]
        },
    entry_points={
        'console_scripts': [
            'nbelnet= nbelnet.cli:main',
            ]
        },
    )
