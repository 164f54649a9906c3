"""Setup script for the Toeplitz constraints toolkit."""

from setuptools import setup, find_packages

setup(
    name="toeplitz-constraints",
    version="0.1.0",
    description="Jordan-block quasilinear systems and their differential constraints",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "tenacity>=8.2.3",
        "pydantic>=2.5.0",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.0",
    ],
    entry_points={"console_scripts": ["toeplitz=apps.cli:main"]},
)
