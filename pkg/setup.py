# setup.py

from setuptools import setup, find_packages

setup(
    name='crcva',
    version='1.0.0',
    description='Counterparty-risk valuation adjustment for commodity forwards and swaps with wrong-way risk.',
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    py_modules=['main'],
    install_requires=[
        'aiofiles',
        'numpy>=1.22',
        'scipy>=1.9',
        'pandas>=1.5',
        'pydantic>=2.0',
    ],
    entry_points={
        'console_scripts': [
            'crcva=main:main',
        ],
    },
    python_requires='>=3.9',
)
