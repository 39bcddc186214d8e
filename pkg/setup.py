from setuptools import setup, find_packages
from pathlib import Path

requirements = Path("requirements.txt").read_text().strip().splitlines()

setup(
    name="edgereg",
    version="0.1.0",
    description="Edge-preserving regularized image reconstruction with AMG-preconditioned FGMRES",
    license="MIT",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[r for r in requirements if not r.startswith("pytest")],
    extras_require={"test": [r for r in requirements if r.startswith("pytest")]},
    entry_points={
        "console_scripts": [
            "edgereg=edgereg.cli:main",
        ],
    },
    python_requires=">=3.10",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
