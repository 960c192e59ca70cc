from setuptools import find_packages, setup

setup(
    name="eckhaus_kdv",
    version="0.0.1",
    description="KdV modulation of marginally stable CGL wave trains",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "PyYAML",
        "dill",
        "pydantic>=2",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["eckhaus-kdv=eckhaus_kdv.cli:main"]},
)
