'''
Setup for the Lipschitz Operators Toolkit
'''
import os.path
from setuptools import setup


here = os.path.abspath(os.path.dirname(__file__))

with open(os.path.join(here, "requirements.txt")) as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name='lipops',
    version='0.1.0',

    description='Fractional, singular and hypersingular integral operators on finite metric measure spaces',
    long_description=open(os.path.join(here, "README.md")).read(),
    long_description_content_type='text/markdown',

    license='MIT',

    platforms=['win32', 'win64', 'linux', 'osx'],
    classifiers=[
        'Development Status :: 4 - Beta',

        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',

        'License :: OSI Approved :: MIT License',

        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.6',
    ],

    keywords='lipschitz spaces singular integrals metric measure spaces',

    packages=['lipops'],
    package_data={'lipops': ['default_options.json']},
    python_requires='>=3.6',
    install_requires=[r for r in requirements if not r.startswith(('flake8', 'hypothesis'))],
    extras_require={'test': ['hypothesis', 'flake8']},
    entry_points={'console_scripts': ['lipops=lipops.cli:main']},
)
