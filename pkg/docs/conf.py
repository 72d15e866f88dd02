# Sphinx configuration for the sysrisk documentation.

project = "sysrisk"
copyright = "2024, sysrisk developers"
author = "sysrisk developers"

extensions = [
    "myst_nb",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx_copybutton",
    "sphinx_design",
]

# docstrings are numpydoc
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autosummary_generate = True

master_doc = "index"
language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"

html_theme = "pydata_sphinx_theme"
html_title = "sysrisk"
