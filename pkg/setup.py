#!/usr/bin/env python
"""setup.py file for the resurgix python modules"""

from setuptools import setup

from resurgix import __version__

setup(name='Resurgix',
      version=__version__,
      packages=['resurgix', 'resurgix.helper', 'resurgix.experiments'],
      package_data={'resurgix': ['data/*.scene', 'data/*.surface', 'data/*.nahm']},
      python_requires='>=3.9',
      install_requires=['mpmath', 'sympy', 'numpy', 'scipy', 'pandas', 'joblib', 'sacred'],
      entry_points={'console_scripts': ['resurgix = resurgix.cli:main']},
      )
