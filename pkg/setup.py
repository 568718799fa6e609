from setuptools import setup, find_packages

setup(
    name="landslide-flow",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy",
        "scipy",
        "torch",
        "pandas",
        "pydantic>=2",
        "pydantic-settings>=2.2",
        "python-dotenv",
        "prometheus-client",
    ],
    entry_points={"console_scripts": ["landslide=app.experiments.cli:main"]},
    author="Your Name",
    author_email="your.email@example.com",
    description="Landslide flow on hyperbolic surfaces",
    keywords="hyperbolic geometry, teichmuller theory, minimal lagrangian maps",
    python_requires=">=3.10",
)
