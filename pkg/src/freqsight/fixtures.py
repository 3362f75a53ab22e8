"""Bundled reference fixture: runtimes constructed to invert the
indicator equations to known values.

For a column whose per-frequency ratio should equal ``v`` everywhere,
pick a column baseline runtime ``B`` and set
``RT(f) = B * (1 - v * (1 - base_freq / f))``; the CPU indicator of that
column is then exactly ``v``. Choosing the column targets

* baseline column            -> cri
* best disk upgrade          -> cri + dri
* best network upgrade       -> cri + nri (lesser upgrades get half)
* combined upgrade pair      -> 1 - mri

reproduces a chosen (cri, mri, dri, nri) quadruple end to end.
"""

from __future__ import annotations

from .model import ExperimentDesign, ResourceScheme, RunRecord

# Disk-mode and memory-mode indicator targets for the reference workload
# (cri, mri, dri, nri).
REFERENCE_TARGETS = {
    "disk": (0.61, 0.16, 0.24, 0.02),
    "memory": (0.53, 0.30, 0.20, 0.06),
}

# Column baseline runtimes in seconds (upgrades shorten the run).
_COLUMN_BASE_RT = {
    "disk": {"base": 100.0, "disk": 85.0, "net_mid": 97.0, "net_best": 95.0, "pair": 80.0},
    "memory": {"base": 80.0, "disk": 70.0, "net_mid": 78.0, "net_best": 76.0, "pair": 62.0},
}


def reference_design(replicates: int = 1) -> ExperimentDesign:
    """The measurement design the reference fixture was built for:
    1.2 GHz / DDR3-1600 / HDD / 1 Gbps baseline, scaled to 2.4 and
    3.6 GHz, upgraded to SSD and 5/10 Gbps."""
    return ExperimentDesign(
        baseline=ResourceScheme(1.2, "DDR3-1600", "HDD", 1.0),
        cpu_freqs=(2.4, 3.6),
        disk_tiers=("SSD",),
        network_bws=(5.0, 10.0),
        replicates=replicates,
        modes=("disk", "memory"),
    )


def _column_records(design, workload_id, mode, disk, net, base_rt, target):
    base_freq = design.baseline.cpu_freq
    records = []
    for f in design.all_freqs:
        rt = base_rt * (1.0 - target * (1.0 - base_freq / f))
        scheme = design.baseline.with_freq(f).with_io(disk, net)
        records.append(RunRecord(
            workload_id=workload_id, mode=mode, scheme=scheme,
            replicate=1, runtime_s=rt,
        ))
    return records


def reference_records(workload_id: str = "sql-mix") -> list[RunRecord]:
    """Run records whose computed indicators equal REFERENCE_TARGETS."""
    design = reference_design()
    base = design.baseline
    best_disk, best_net = design.best_pair()
    mid_net = design.network_bws[0]
    records = []
    for mode, (cri_t, mri_t, dri_t, nri_t) in REFERENCE_TARGETS.items():
        rts = _COLUMN_BASE_RT[mode]
        columns = [
            (base.disk_tier, base.network_bw, rts["base"], cri_t),
            (best_disk, base.network_bw, rts["disk"], cri_t + dri_t),
            (base.disk_tier, mid_net, rts["net_mid"], cri_t + nri_t / 2),
            (base.disk_tier, best_net, rts["net_best"], cri_t + nri_t),
            (best_disk, best_net, rts["pair"], 1.0 - mri_t),
        ]
        for (disk, net, base_rt, target) in columns:
            records.extend(_column_records(design, workload_id, mode, disk, net, base_rt, target))
    return records
