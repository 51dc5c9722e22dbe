from pathlib import Path
from setuptools import setup

version = "1.0.0.dev0"

long_description = (
    f"{Path('README.rst').read_text()}\n" f"{Path('CHANGES.rst').read_text()}"
)

setup(
    name="ruinbounds",
    version=version,
    description="Uniform bounds for simultaneous ruin probabilities "
    "of multivariate Brownian risk models",
    long_description=long_description,
    long_description_content_type="text/x-rst",
    # Get more strings from
    # https://pypi.org/classifiers/
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU Library or Lesser General Public License (LGPL)",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Programming Language :: Python :: 3.14",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    keywords="ruin probability brownian motion gaussian bounds monte carlo",
    license="LGPL",
    include_package_data=True,
    zip_safe=False,
    python_requires=">=3.10",
    install_requires=[
        "lxml",
        "numpy",
        "plone.supermodel>=1.3",
        "scipy",
        "zope.component[zcml]",
        "zope.configuration",
        "zope.interface",
        "zope.schema",
    ],
    extras_require={
        "test": [
            "plone.testing",
            "zope.testrunner",
        ],
    },
    entry_points="""
    # -*- Entry points: -*-
    [console_scripts]
    ruinbounds = ruinbounds.cli:main
    """,
)
