"""Quantitative estimate of drug-likeness.

Unweighted geometric mean of eight asymmetric-double-sigmoid desirability
functions (MW, LogP, HBA, HBD, TPSA, rotatable bonds, aromatic rings,
structural alerts) with the published desirability constants embedded below.
"""

import math

from .descriptors import DescriptorRecord

# (a, b, c, d, e, f, dmax) per property
ADS_PARAMS = {
    "MW": (2.817065973, 392.5754953, 290.7489764, 2.419764353,
           49.22325677, 65.37051707, 104.9805561),
    "ALOGP": (3.172690585, 137.8624751, 2.534937431, 4.581497897,
              0.822739154, 0.576295591, 131.3186604),
    "HBA": (2.948620388, 160.4605972, 3.615294657, 4.435986202,
            0.290141953, 1.300669958, 148.7763046),
    "HBD": (1.618662227, 1010.051101, 0.985094388, 0.000000001,
            0.713820843, 0.920922555, 258.1632616),
    "PSA": (1.876861559, 125.2232657, 62.90773554, 87.83366614,
            12.01999824, 28.51324732, 104.5686167),
    "ROTB": (0.010000091, 272.4121427, 2.558379970, 1.565547684,
             1.271567166, 2.758063707, 105.4420403),
    "AROM": (3.217788970, 957.7374108, 2.274627939, 0.000000001,
             1.317690384, 0.375760881, 312.3372610),
    "ALERTS": (0.990000000, 1199.094025, -0.09002883, 0.000000001,
               0.185904477, 0.875193782, 417.7253140),
}


def ads(x: float, name: str) -> float:
    """Asymmetric double sigmoid desirability in (0, 1]."""
    a, b, c, d, e, f, dmax = ADS_PARAMS[name]
    val = a + b / (1.0 + math.exp(-(x - c + d / 2.0) / e)) \
        * (1.0 - 1.0 / (1.0 + math.exp(-(x - c - d / 2.0) / f)))
    return max(val / dmax, 1e-12)


def geometric_mean(values) -> float:
    values = list(values)
    if any(v <= 0.0 for v in values):
        return 0.0
    return math.exp(sum(math.log(v) for v in values) / len(values))


def desirabilities(d: DescriptorRecord, alerts: int = 0) -> dict[str, float]:
    return {
        "MW": ads(d.mw, "MW"),
        "ALOGP": ads(d.logp, "ALOGP"),
        "HBA": ads(d.hba, "HBA"),
        "HBD": ads(d.hbd, "HBD"),
        "PSA": ads(d.tpsa, "PSA"),
        "ROTB": ads(d.rot_bonds, "ROTB"),
        "AROM": ads(d.aromatic_ring_count, "AROM"),
        "ALERTS": ads(alerts, "ALERTS"),
    }


def qed(d: DescriptorRecord, alerts: int = 0) -> float:
    return geometric_mean(desirabilities(d, alerts).values())
