"""
Skill scores from a contingency table
=====================================
"""

from sepmap.metrics import ContingencyTable, skill_report

tables = {
    "perfect": ContingencyTable(tp=10, fp=0, fn=0, tn=10),
    "inverted": ContingencyTable(tp=0, fp=10, fn=10, tn=0),
    "rare events": ContingencyTable(tp=3, fp=4, fn=1, tn=92),
    "never warns": ContingencyTable(tp=0, fp=0, fn=5, tn=95),
}

for name, t in tables.items():
    r = skill_report(t).to_dict()
    row = "  ".join(f"{k}={'undef' if v is None else f'{v:+.3f}'}" for k, v in r.items())
    print(f"{name:12s} {row}")

# the two scores part ways as quiet days pile up
for tn in (10, 100, 1000):
    r = skill_report(ContingencyTable(8, 6, 2, tn))
    print(f"tn={tn:5d}  tss={r.tss:.3f}  hss={r.hss:.3f}")
