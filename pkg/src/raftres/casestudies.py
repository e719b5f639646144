"""Generators for the parameterised benchmark trees, as extended-Galileo text."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

FAMILIES = ("VOT", "DSPARE", "HECS", "FTPP", "RC", "HVC", "RWC")

# tested parameter range per family
RANGES = {
    "VOT": (2, 4),
    "DSPARE": (3, 5),
    "HECS": (1, 5),
    "FTPP": (4, 6),
    "RC": (3, 6),
    "HVC": (4, 7),
    "RWC": (1, 4),
}

# reference estimates: (family, param) -> {metric: value}
REFERENCE = {
    ("VOT", 2): {"UNAVAIL": 8.47e-4},
    ("VOT", 3): {"UNAVAIL": 1.94e-5},
    ("VOT", 4): {"UNAVAIL": 4.70e-7},
    ("HECS", 1): {"UNAVAIL": 6.26e-3},
    ("HECS", 2): {"UNAVAIL": 6.11e-5, "UNREL": 1.98e-3},
    ("HECS", 3): {"UNAVAIL": 1.56e-6, "UNREL": 3.60e-5},
    ("HECS", 4): {"UNAVAIL": 1.16e-7, "UNREL": 2.35e-6},
    ("HECS", 5): {"UNAVAIL": 2.02e-8, "UNREL": 2.61e-7},
    ("RC", 3): {"UNAVAIL": 3.73e-5},
    ("RC", 4): {"UNAVAIL": 3.39e-6},
    ("RC", 5): {"UNAVAIL": 5.07e-7},
    ("RC", 6): {"UNAVAIL": 1.02e-7},
    ("RWC", 1): {"UNAVAIL": 4.88e-4},
    ("RWC", 2): {"UNAVAIL": 3.15e-5, "UNREL": 7.03e-4},
    ("RWC", 3): {"UNAVAIL": 3.03e-6, "UNREL": 6.08e-5},
    ("RWC", 4): {"UNAVAIL": 4.55e-7, "UNREL": 7.31e-6},
    ("DSPARE", 3): {"UNREL": 7.03e-4},
    ("DSPARE", 4): {"UNREL": 6.08e-5},
    ("DSPARE", 5): {"UNREL": 7.31e-6},
    ("FTPP", 4): {"UNREL": 1.20e-2},
    ("FTPP", 5): {"UNREL": 2.49e-4},
    ("FTPP", 6): {"UNREL": 6.34e-7},
    ("HVC", 4): {"UNREL": 1.11e-2},
    ("HVC", 5): {"UNREL": 4.61e-4},
    ("HVC", 6): {"UNREL": 3.44e-5},
    ("HVC", 7): {"UNREL": 4.17e-6},
}

_M, _H = 60, 3600
# wall-clock budget in seconds per (family, param, metric)
BUDGETS = {
    ("VOT", 2, "UNAVAIL"): 5 * _M, ("VOT", 3, "UNAVAIL"): 30 * _M, ("VOT", 4, "UNAVAIL"): 3 * _H,
    ("HECS", 1, "UNAVAIL"): 5, ("HECS", 2, "UNAVAIL"): 20, ("HECS", 3, "UNAVAIL"): 2 * _M,
    ("HECS", 4, "UNAVAIL"): 10 * _M, ("HECS", 5, "UNAVAIL"): 1 * _H,
    ("RC", 3, "UNAVAIL"): 30, ("RC", 4, "UNAVAIL"): 5 * _M, ("RC", 5, "UNAVAIL"): 30 * _M,
    ("RC", 6, "UNAVAIL"): 2 * _H,
    ("RWC", 1, "UNAVAIL"): 30, ("RWC", 2, "UNAVAIL"): 5 * _M, ("RWC", 3, "UNAVAIL"): 30 * _M,
    ("RWC", 4, "UNAVAIL"): 2 * _H,
    ("DSPARE", 3, "UNREL"): 5 * _M, ("DSPARE", 4, "UNREL"): 30 * _M, ("DSPARE", 5, "UNREL"): 3 * _H,
    ("HECS", 2, "UNREL"): 20, ("HECS", 3, "UNREL"): 5 * _M, ("HECS", 4, "UNREL"): 30 * _M,
    ("HECS", 5, "UNREL"): 3 * _H,
    ("FTPP", 4, "UNREL"): 30, ("FTPP", 5, "UNREL"): 4 * _M, ("FTPP", 6, "UNREL"): 40 * _M,
    ("HVC", 4, "UNREL"): 90, ("HVC", 5, "UNREL"): 5 * _M, ("HVC", 6, "UNREL"): 30 * _M,
    ("HVC", 7, "UNREL"): 2 * _H,
    ("RWC", 2, "UNREL"): 5 * _M, ("RWC", 3, "UNREL"): 30 * _M, ("RWC", 4, "UNREL"): 2 * _H,
}


class RangeWarning(UserWarning):
    """The parameter lies outside the tested range of its family."""


@dataclass(frozen=True)
class CaseSpec:
    family: str
    param: int

    def __post_init__(self):
        fam = self.family.upper()
        if fam not in FAMILIES:
            raise ValueError(f"unknown case study {self.family!r}; choose from {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "param", int(self.param))
        if self.param < 1:
            raise ValueError("the parameter must be a positive integer")

    @property
    def name(self) -> str:
        return f"{self.family}-{self.param}"

    @property
    def in_range(self) -> bool:
        lo, hi = RANGES[self.family]
        return lo <= self.param <= hi

    @classmethod
    def parse(cls, text: str) -> "CaseSpec":
        fam, _, p = text.partition("-")
        return cls(fam, int(p))


class _Writer:
    def __init__(self, title: str, top: str):
        self.lines = [f"// {title}", f'toplevel "{top}";']

    def gate(self, name, kind, children):
        kids = " ".join(f'"{c}"' for c in children)
        self.lines.append(f'"{name}" {kind} {kids};')

    def basic(self, name, fail, repair=None, dorm=None):
        parts = [f'"{name}"', f"EXT_failPDF={fail}"]
        if repair is not None:
            parts.append(f"EXT_repairPDF={repair}")
        if dorm is not None:
            parts.append(f"EXT_dormPDF={dorm}")
        self.lines.append(" ".join(parts) + ";")

    def rbox(self, name, children):
        self.gate(name, "repairbox_priority", children)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _vot(n: int) -> str:
    nb = n + 6
    na = nb - 1
    ka, kb = na - 3, nb - 2
    shared = [f"AB_{i}" for i in range(1, nb - 4 + 1)]
    only_a = [f"A_{i}" for i in range(1, na - len(shared) + 1)]
    only_b = [f"B_{i}" for i in range(1, nb - len(shared) + 1)]
    w = _Writer(f"VOT-{n}: AND of VOT{ka}/{na} and VOT{kb}/{nb}", "System")
    w.gate("System", "and", ["VOT_A", "VOT_B"])
    w.gate("VOT_A", f"{ka}of{na}", shared + only_a)
    w.gate("VOT_B", f"{kb}of{nb}", shared + only_b)
    for b in shared + only_a:
        w.basic(b, "lognormal(4.37,0.33)", "uniform(0.4,0.95)")
    for b in only_b:
        w.basic(b, "weibull(4.5,0.0125)", "uniform(0.4,0.95)")
    # children of VOT_A first (shared ones leading), then those of VOT_B only
    w.rbox("RBOX", shared + only_a + only_b)
    return w.text()


def _dspare(n: int) -> str:
    sbes = [f"SBE_{j}" for j in range(1, n + 1)]
    w = _Writer(f"DSPARE-{n}: AND of 3 spare gates sharing {n} spares", "System")
    w.gate("System", "and", [f"SG_{i}" for i in (1, 2, 3)])
    for i in (1, 2, 3):
        w.gate(f"SG_{i}", "wsp", [f"BE_{i}"] + sbes)
    for i in (1, 2, 3):
        w.basic(f"BE_{i}", "exponential(0.07)", "uniform(1.0,2.0)")
    for s in sbes:
        w.basic(s, "exponential(0.07)", "uniform(1.0,2.0)", "exponential(0.035)")
    w.rbox("RBOX", sbes + [f"BE_{i}" for i in (1, 2, 3)])
    return w.text()


def _hecs(n: int) -> str:
    # Wiring of the memory interfaces and the application subsystem follows
    # the case-study drawing; the FDEP targets are a reconstruction.
    ps = [f"PS_{b}" for b in range(1, n + 1)]
    buses = [f"B_{k}" for k in range(1, 2 * n + 1)]
    mem = [f"M_{j}" for j in range(1, 6)]
    w = _Writer(f"HECS-{n}: {n} shared spare processors, {2 * n} buses", "System")
    w.gate("System", "or", ["Processors", "Memory", "Bus", "Application"])
    w.gate("Processors", "and", ["SG_1", "SG_2"])
    w.gate("SG_1", "csp", ["P_1"] + ps)
    w.gate("SG_2", "csp", ["P_2"] + ps)
    w.gate("Memory", "3of5", mem)
    w.gate("FDEP_1", "fdep", ["MI_1", "M_1", "M_2", "M_3"])
    w.gate("FDEP_2", "fdep", ["MI_2", "M_3", "M_4", "M_5"])
    w.gate("Bus", "and", buses)
    w.gate("Application", "or", ["SW", "HW"])
    w.basic("SW", "exponential(4.5E-12)", "uniform(28.0,56.0)")
    w.basic("HW", "exponential(1.0E-10)", "uniform(28.0,56.0)")
    for i in (1, 2):
        w.basic(f"MI_{i}", "exponential(5.0E-9)", "uniform(21.0,28.0)")
    for m in mem:
        w.basic(m, "exponential(6.0E-8)", "uniform(21.0,28.0)")
    for b in buses:
        w.basic(b, "exponential(8.7E-4)", "lognormal(4.45,0.24)")
    for a in (1, 2):
        w.basic(f"P_{a}", "exponential(1.0E-3)", "lognormal(4.45,0.24)")
    for s in ps:
        w.basic(s, "exponential(1.5E-3)", "lognormal(4.45,0.24)", "never()")
    w.rbox("RBOX_Interface", ["HW", "SW"])
    w.rbox("RBOX_Memory", ["MI_1", "MI_2"] + mem)
    w.rbox("RBOX_Processors", ["P_1", "P_2"] + ps)
    w.rbox("RBOX_Bus", buses)
    return w.text()


def _ftpp(n: int) -> str:
    # One triad: VOT2 over three cold spare gates sharing n spares.  The
    # network elements feed the top through an AND (the triad is lost only
    # if the whole network is down); this coupling is a reconstruction.
    sbes = [f"SBE_{k}" for k in range(1, n + 1)]
    nes = [f"NE_{i}" for i in range(1, 5)]
    w = _Writer(f"FTPP-{n}: one triad with {n} shared cold spares", "System")
    w.gate("System", "or", ["Triad", "Network"])
    w.gate("Triad", "2of3", [f"SG_{j}" for j in (1, 2, 3)])
    for j in (1, 2, 3):
        w.gate(f"SG_{j}", "csp", [f"B_{j}"] + sbes)
    w.gate("Network", "and", nes)
    for ne in nes:
        w.basic(ne, "lognormal(6.5,0.5)", "normal(150.0,50.0)")
    for j in (1, 2, 3):
        w.basic(f"B_{j}", "exponential(2.8E-2)", "normal(15.0,3.0)")
    for s in sbes:
        w.basic(s, "exponential(2.8E-2)", "normal(15.0,3.0)", "never()")
    w.rbox("RBOX_Network", nes)
    w.rbox("RBOX_Processors", [f"B_{j}" for j in (1, 2, 3)] + sbes)
    return w.text()


def _rc_parts(w: _Writer, k: int, prefix: str = ""):
    gates = []
    for i in range(1, k + 3):
        g, be, sbe = f"{prefix}SG_{i}", f"{prefix}BE_{i}", f"{prefix}SBE_{i}"
        w.gate(g, "wsp", [be, sbe])
        gates.append(g)
    for i in range(1, k + 3):
        w.basic(f"{prefix}BE_{i}", "exponential(0.04)", "normal(2.0,0.7)")
    for i in range(1, k + 3):
        w.basic(f"{prefix}SBE_{i}", "exponential(0.04)", "normal(2.0,0.7)", "exponential(0.5)")
    box = [f"{prefix}BE_{i}" for i in range(1, k + 3)] + [f"{prefix}SBE_{i}" for i in range(1, k + 3)]
    return gates, box


def _hvc_parts(w: _Writer, n: int, prefix: str = ""):
    sbes = [f"{prefix}SBE_{j}" for j in range(1, n + 1)]
    gates = []
    for i in range(1, 5):
        g = f"{prefix}SG_{i}"
        w.gate(g, "wsp", [f"{prefix}BE_{i}"] + sbes)
        gates.append(g)
    for i in range(1, 5):
        w.basic(f"{prefix}BE_{i}", "rayleigh(1.999)", "uniform(0.15,0.45)")
    for s in sbes:
        w.basic(s, "rayleigh(1.999)", "uniform(0.15,0.45)", "erlang(3,0.25)")
    box = [f"{prefix}BE_{i}" for i in range(1, 5)] + sbes
    return gates, box


def _rc(k: int) -> str:
    w = _Writer(f"RC-{k}: VOT{k} over {k + 2} spare gates", "System")
    w.gate("System", f"{k}of{k + 2}", [f"SG_{i}" for i in range(1, k + 3)])
    _, box = _rc_parts(w, k)
    w.rbox("RBOX", box)
    return w.text()


def _hvc(n: int) -> str:
    w = _Writer(f"HVC-{n}: VOT2 over 4 spare gates sharing {n} spares", "System")
    w.gate("System", "2of4", [f"SG_{i}" for i in range(1, 5)])
    _, box = _hvc_parts(w, n)
    w.rbox("RBOX", box)
    return w.text()


def _rwc(m: int) -> str:
    k = m + 1
    w = _Writer(f"RWC-{m}: relay cabinets RC-{k} and high voltage cabinets HVC-{m + 2}", "System")
    rc_gates = [f"RC_SG_{i}" for i in range(1, k + 3)]
    w.gate("System", f"{k}of{k + 3}", rc_gates + ["HVC"])
    w.gate("HVC", "or", ["HV_Vote"])
    w.gate("HV_Vote", "2of4", [f"HV_SG_{i}" for i in range(1, 5)])
    _, rc_box = _rc_parts(w, k, "RC_")
    _, hv_box = _hvc_parts(w, m + 2, "HV_")
    w.rbox("RBOX_RC", rc_box)
    w.rbox("RBOX_HVC", hv_box)
    return w.text()


_GENERATORS = {
    "VOT": _vot,
    "DSPARE": _dspare,
    "HECS": _hecs,
    "FTPP": _ftpp,
    "RC": _rc,
    "HVC": _hvc,
    "RWC": _rwc,
}


def generate(spec: CaseSpec | str, param: int | None = None) -> str:
    """Extended-Galileo text of a case study (``generate("RC", 3)`` or ``generate(CaseSpec(...))``)."""
    if not isinstance(spec, CaseSpec):
        spec = CaseSpec(spec, param) if param is not None else CaseSpec.parse(spec)
    if not spec.in_range:
        lo, hi = RANGES[spec.family]
        warnings.warn(f"{spec.name} is outside the tested range {lo}..{hi}", RangeWarning, stacklevel=2)
    return _GENERATORS[spec.family](spec.param)


def reference(spec: CaseSpec | str, metric: str) -> float | None:
    if not isinstance(spec, CaseSpec):
        spec = CaseSpec.parse(spec)
    return REFERENCE.get((spec.family, spec.param), {}).get(metric)
