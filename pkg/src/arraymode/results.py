"""Common result container for interface-efficiency calculations."""

from dataclasses import dataclass, field

INFINITE_THEORY = "infinite_theory"
FINITE_THEORY = "finite_theory"
SCATTERING = "scattering"


@dataclass
class InterfaceResult:
    """Coupling rate, loss rate, and efficiency of the light-matter interface.

    For theory sources r0 = gamma_coupling / (gamma_coupling + gamma_loss);
    for scattering runs r0 is the magnitude of the modal amplitude overlap
    between the back-scattered field and the mirror target mode, and the
    rate fields are not populated.  delta_res is the detuning at which the
    result was evaluated (the resonance, when a search was performed).
    """

    r0: float
    gamma: float = float("nan")
    gamma_loss: float = float("nan")
    delta_res: float = 0.0
    source: str = SCATTERING
    diagnostics: dict = field(default_factory=dict)
