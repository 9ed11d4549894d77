"""
A complete convergence study
============================

The harness reads a study description, solves the limit plate once, runs
the eps sweep and checks every invariant. The same pipeline is behind the
``plate-gamma run`` command.
"""
from plategamma import config, harness

cfg = config.from_dict({
    'material': {'kind': 'random_graded', 'shift': 1.0, 'gradient': 0.3},
    'loads': {'body': [0.0, 0.0, [[36.0, 1, 1, 0], [-36.0, 2, 1, 0],
                                  [-36.0, 1, 2, 0], [36.0, 2, 2, 0]]]},
    'study': {'eps': [0.4, 0.2, 0.1]},
    'mesh': {'n1': 6, 'n2': 6, 'n3': 2, 'limit_n1': 12, 'limit_n2': 12},
    'checks': {'energy_gap': None, 'lower_bound_slack': None},
}, seed=4)

report, study = harness.run_study(cfg, threads=2)
report.checks = harness.limit_checks(study) + report.checks
print(harness.report_csv(report))
print(harness.summary_text(report, "graded anisotropic plate, coarse mesh"))
