"""Back-action cooling of a membrane in a cavity with intensity-dependent coupling.

Modules, in pipeline order: :mod:`params` (configuration and derived scalars),
:mod:`coupling` (detuning series, f(n_b), epsilon/sigma), :mod:`steady_state`
(fixed point, linearization, stability), :mod:`response` (susceptibility,
effective frequency and damping), :mod:`cooling` (variances, n_eff, T_eff) and
:mod:`cli`.
"""

__version__ = "0.1.0"
