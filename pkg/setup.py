from setuptools import setup, find_packages

setup(
    name="subtrack",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        'numpy>=1.26.4,<2.0.0',
        'scipy>=1.15.1',
        'filterpy>=1.4.5',
        'pydantic>=2.10.6',
        'pydantic-settings>=2.7.1',
        'python-dotenv>=1.0.0',
        'python-json-logger>=2.0.7',
        'tqdm>=4.67.1',
    ],
    entry_points={
        'console_scripts': [
            'subtrack=cli.commands:main',
        ],
    },
)
