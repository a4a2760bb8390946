"""Non-linear mixed-effects bootstrap toolkit.

SAEM estimation, conditional sampling of individual random effects,
asymptotic (FIM) confidence intervals and four bootstrap schemes (case,
parametric, non-parametric, conditional non-parametric), plus the Monte
Carlo coverage-study harness. The heavy lifting lives in the compiled
`_core` extension.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
