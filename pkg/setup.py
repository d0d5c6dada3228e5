from setuptools import setup, find_packages

setup(
    name="feecast",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    include_package_data=True,
    install_requires=[
        # Core dependencies
        "numpy>=1.24",
        "scipy>=1.10",  # Nelder-Mead, linear solves, signal filters
        "pandas>=2.0",  # CSV layer, rolling statistics
        "pydantic>=2.0.0",  # Records and configuration
        "python-dotenv>=1.0.0",
        "requests",  # Bitcoin Core JSON-RPC and price API
        "tqdm",  # Progress bars for folds, boosting and training
        "tomli>=1.1.0; python_version < '3.11'",  # tomllib backport
    ],
    extras_require={
        "dev": [
            "pytest",
            "scikit-learn",  # Independent metric oracles in tests
        ],
    },
    entry_points={
        "console_scripts": [
            "feecast=feecast.cli:main",
        ],
    },
    description="Bitcoin block fee-rate forecasting: ingest, features, models and backtests",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
)
