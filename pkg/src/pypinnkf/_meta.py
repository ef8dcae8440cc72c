PACKAGE_NAME = "pypinnkf"
AUTHOR = "Lucio"
HOMEPAGE = "https://github.com/LuciosProjects/PyPinnKF"

__version__ = "0.3.0"
