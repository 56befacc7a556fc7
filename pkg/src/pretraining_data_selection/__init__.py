# read version from installed package
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("pretraining-data-selection")
except PackageNotFoundError:
    __version__ = "0+unknown"
