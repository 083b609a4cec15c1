from setuptools import setup, find_packages
from relayout import __version__


setup(
    name='ReLayout',
    version=__version__,
    author='The ReLayout developers',
    packages=find_packages(),
    scripts=['scripts/relayout'],
    install_requires=['numpy', 'scipy', 'six', 'scikit-learn>=0.22',
                      'Levenshtein'],
    tests_require=['mock'],
    description='Layout-aware document encoder pre-training on OCR-level '
                'segments',
    long_description=open('README.md').read(),
)
