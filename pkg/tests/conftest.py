import pytest

from freqsight import CellStats, ExperimentDesign, ResourceScheme, RuntimeMatrix
from freqsight.fixtures import reference_design


@pytest.fixture
def design() -> ExperimentDesign:
    """1.2 GHz / DDR3-1600 / HDD / 1 Gbps baseline with 2.4 and 3.6 GHz,
    SSD, and 5/10 Gbps alternatives."""
    return reference_design(replicates=1)


def column_matrix(design, workload, mode, columns) -> RuntimeMatrix:
    """Build a matrix from {(disk_tier, network_bw): (rt at each design
    frequency, baseline first)}."""
    cells = {}
    for (disk, net), rts in columns.items():
        assert len(rts) == len(design.all_freqs)
        for freq, rt in zip(design.all_freqs, rts):
            scheme = ResourceScheme(freq, design.baseline.memory_tier, disk, net)
            cells[(workload, mode, scheme)] = CellStats(rt, 0.0, 1)
    return RuntimeMatrix(cells)
