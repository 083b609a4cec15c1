# -*- coding: utf-8 -*-
#
# ReLayout documentation build configuration file.

import sys
import os

sys.path.insert(0, os.path.abspath('.'))
sys.path.insert(0, os.path.abspath('..'))

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'numpydoc'
]

autosummary_generate = True
autodoc_default_flags = ['members', 'inherited-members']
numpydoc_class_members_toctree = False

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'ReLayout'
copyright = u'2026, the ReLayout developers'

import relayout
version = relayout.__version__
release = relayout.__version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

import sphinx_rtd_theme
html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_static_path = ['_static']
htmlhelp_basename = 'ReLayoutdoc'

latex_elements = {
}
latex_documents = [
  ('index', 'ReLayout.tex', u'ReLayout Documentation',
   u'The ReLayout developers', 'manual'),
]

man_pages = [
    ('index', 'relayout', u'ReLayout Documentation',
     [u'The ReLayout developers'], 1)
]
