"""Drug-likeness rule filters: Lipinski, Pfizer, GSK, Golden Triangle.

Thresholds are the literature-standard values, fixed here as constants.
"""

from dataclasses import dataclass, field

from .descriptors import DescriptorRecord

LIPINSKI_MW_MAX = 500.0
LIPINSKI_LOGP_MAX = 5.0
LIPINSKI_HBD_MAX = 5
LIPINSKI_HBA_MAX = 10

PFIZER_LOGP_MIN = 3.0
PFIZER_TPSA_MAX = 75.0

GSK_MW_MAX = 400.0
GSK_LOGP_MAX = 4.0

GOLDEN_MW_RANGE = (200.0, 500.0)
GOLDEN_LOGP_RANGE = (-2.0, 5.0)


@dataclass
class FilterReport:
    lipinski_violations: int
    pfizer_flag: bool
    gsk_flag: bool
    golden_triangle_flag: bool
    pains_alerts: list = field(default_factory=list)


def rule_filters(d: DescriptorRecord) -> FilterReport:
    violations = sum((
        d.mw > LIPINSKI_MW_MAX,
        d.logp > LIPINSKI_LOGP_MAX,
        d.hbd > LIPINSKI_HBD_MAX,
        d.hba > LIPINSKI_HBA_MAX,
    ))
    pfizer = d.logp > PFIZER_LOGP_MIN and d.tpsa < PFIZER_TPSA_MAX
    gsk = d.mw > GSK_MW_MAX or d.logp > GSK_LOGP_MAX
    golden = not (GOLDEN_MW_RANGE[0] <= d.mw <= GOLDEN_MW_RANGE[1]
                  and GOLDEN_LOGP_RANGE[0] <= d.logp <= GOLDEN_LOGP_RANGE[1])
    return FilterReport(
        lipinski_violations=violations,
        pfizer_flag=pfizer,
        gsk_flag=gsk,
        golden_triangle_flag=golden,
    )
