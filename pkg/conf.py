# -*- coding: utf-8 -*-
#
# densitycp documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys
import warnings

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath("."))

from densitycp import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = "densitycp"
copyright = "2024, the densitycp developers"
author = "the densitycp developers"

# The short X.Y version
version = ".".join(__version__.split(".")[:2])
# The full version, including alpha/beta/rc tags
release = __version__

# -- General configuration ---------------------------------------------------

# If your documentation needs a minimal Sphinx version, state it here.
needs_sphinx = "1.8.5"

# Add any Sphinx extension module names here, as strings.
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx_gallery.gen_gallery",
]

sphinx_gallery_conf = {
    # path to your example scripts
    "examples_dirs": ["demonstrations"],
    # path where to save gallery generated examples
    "gallery_dirs": ["demos"],
    # execute files that match the following filename pattern,
    # and skip those that don't.
    "filename_pattern": r"tutorial",
    # first notebook cell in generated Jupyter notebooks
    "first_notebook_cell": "%matplotlib inline",
    # thumbnail size
    "thumbnail_size": (400, 400),
    "reference_url": {
        # The module you locally document uses None
        "densitycp": None,
    },
    "backreferences_dir": "backreferences",
    "doc_module": ("densitycp",),
    "junit": "../test-results/sphinx-gallery/junit.xml",
}

mathjax_path = "https://cdnjs.cloudflare.com/ajax/libs/mathjax/2.7.5/MathJax.js?config=TeX-MML-AM_CHTML"

# Remove warnings that occur when generating the the tutorials
warnings.filterwarnings(
    "ignore", category=UserWarning, message=r"Matplotlib is currently using agg"
)

napoleon_google_docstring = True
autodoc_member_order = "bysource"

# The suffix(es) of source filenames.
source_suffix = ".rst"

# The master toctree document.
master_doc = "index"

# The language for content autogenerated by Sphinx.
language = None

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store", "venv", "examples", "results"]

# The name of the Pygments (syntax highlighting) style to use.
pygments_style = "sphinx"

# -- Options for HTML output -------------------------------------------------

html_theme = "alabaster"

html_theme_options = {
    "description": "Contact process with a density-dependent birth rate",
    "fixed_sidebar": True,
}

html_sidebars = {"**": ["about.html", "navigation.html", "searchbox.html"]}

# Output file base name for HTML help builder.
htmlhelp_basename = "densitycpdoc"

# -- Options for intersphinx ----------------------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}
