"""posegap: synthetic training-data factory and 6DoF pose evaluation harness."""

__version__ = "0.1.0"
