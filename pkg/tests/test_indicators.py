from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from freqsight import (
    CRI,
    DRI,
    INDICATORS,
    MRI,
    NRI,
    Flag,
    IndicatorSet,
    Thresholds,
    UtilizationSummary,
    compute_all,
    cpi,
    cri,
    diagnose,
    dri,
    mri,
    nri,
    rank_bottleneck,
)
from freqsight.errors import IncompleteMatrixError, InvalidInputError

from conftest import column_matrix

APPROX = 1e-12  # float-rounded arithmetic only


class TestCpi:
    def test_no_change(self):
        assert cpi(100.0, 100.0) == 0.0

    def test_halved_runtime(self):
        assert cpi(100.0, 50.0) == 0.5

    def test_slowdown_goes_negative(self):
        assert cpi(100.0, 110.0) == pytest.approx(-0.1, abs=APPROX)

    @pytest.mark.parametrize("base,scaled", [(0.0, 10.0), (10.0, 0.0), (-1.0, 1.0)])
    def test_rejects_nonpositive_runtimes(self, base, scaled):
        with pytest.raises(InvalidInputError):
            cpi(base, scaled)


class TestCri:
    def test_perfectly_linear_scaling(self):
        value, flags = cri(100.0, {2.4: 50.0, 3.6: 100.0 / 3.0}, 1.2)
        assert value == pytest.approx(1.0, abs=APPROX)

    def test_serial_sixty_forty_split(self):
        # 60 s of compute scaling with frequency plus 40 s of I/O.
        value, flags = cri(100.0, {2.4: 70.0, 3.6: 60.0}, 1.2)
        assert value == pytest.approx(0.6, abs=APPROX)
        assert flags == frozenset()

    def test_frequency_has_no_effect(self):
        value, _ = cri(100.0, {2.4: 100.0, 3.6: 100.0}, 1.2)
        assert value == 0.0

    def test_slowdown_clamps_and_flags(self):
        value, flags = cri(100.0, {2.4: 120.0}, 1.2)
        assert value == 0.0
        assert Flag.CLAMPED_NEGATIVE_CPI in flags

    def test_superlinear_speedup_caps_at_one(self):
        value, flags = cri(100.0, {2.4: 10.0}, 1.2)
        assert value == 1.0
        assert Flag.CLAMPED_INDICATOR in flags

    def test_empty_input_rejected(self):
        with pytest.raises(InvalidInputError):
            cri(100.0, {}, 1.2)

    def test_frequency_at_or_below_baseline_rejected(self):
        with pytest.raises(InvalidInputError):
            cri(100.0, {1.2: 80.0}, 1.2)


class TestDri:
    def test_disk_upgrade_removes_all_disk_time(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): (100.0, 70.0, 60.0),
            ("SSD", 1.0): (60.0, 30.0, 20.0),
        })
        value, flags = dri(matrix, design, "q1", "disk")
        assert value == pytest.approx(0.4, abs=APPROX)

    def test_zero_disk_time_gives_zero(self, design):
        col = (100.0, 70.0, 60.0)
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): col, ("SSD", 1.0): col,
        })
        value, _ = dri(matrix, design, "q1", "disk")
        assert value == 0.0

    def test_noisy_negative_increment_clamps_with_flag(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): (100.0, 70.0, 60.0),
            ("SSD", 1.0): (100.0, 80.0, 70.0),  # upgrade looks slower
        })
        value, flags = dri(matrix, design, "q1", "disk")
        assert value == 0.0
        assert Flag.CLAMPED_INDICATOR in flags

    def test_missing_cells_named(self, design):
        matrix = column_matrix(design, "q1", "disk", {("HDD", 1.0): (100.0, 70.0, 60.0)})
        with pytest.raises(IncompleteMatrixError) as err:
            dri(matrix, design, "q1", "disk")
        assert err.value.missing
        assert all(s.disk_tier == "SSD" for (_, s) in err.value.missing)


class TestNri:
    def test_network_upgrade_removes_all_network_time(self, design):
        unchanged = (100.0, 70.0, 60.0)
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): unchanged,
            ("HDD", 5.0): unchanged,
            ("HDD", 10.0): (60.0, 30.0, 20.0),
        })
        value, _ = nri(matrix, design, "q1", "disk")
        assert value == pytest.approx(0.4, abs=APPROX)

    def test_max_selects_larger_increment(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): (100.0, 70.0, 60.0),   # 0.6
            ("HDD", 5.0): (90.0, 61.0, 51.0),    # partial removal
            ("HDD", 10.0): (60.0, 30.0, 20.0),   # full removal -> 1.0
        })
        value, _ = nri(matrix, design, "q1", "disk")
        assert value == pytest.approx(0.4, abs=APPROX)

    def test_zero_network_time(self, design):
        col = (80.0, 50.0, 40.0)
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): col, ("HDD", 5.0): col, ("HDD", 10.0): col,
        })
        value, _ = nri(matrix, design, "q1", "disk")
        assert value == 0.0


class TestMri:
    def test_memory_stall_survives_upgrades(self, design):
        # 60 s compute + 20 s memory stall + 20 s disk; the upgrade pair
        # removes the disk time, stalls stay.
        matrix = column_matrix(design, "q1", "disk", {
            ("SSD", 10.0): (80.0, 50.0, 40.0),
        })
        value, flags = mri(matrix, design, "q1", "disk")
        assert value == pytest.approx(0.25, abs=APPROX)
        assert flags == frozenset()

    def test_pure_cpu_workload(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("SSD", 10.0): (60.0, 30.0, 20.0),
        })
        value, _ = mri(matrix, design, "q1", "disk")
        assert value == pytest.approx(0.0, abs=APPROX)

    def test_fully_memory_blocked_workload(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("SSD", 10.0): (100.0, 100.0, 100.0),
        })
        value, _ = mri(matrix, design, "q1", "disk")
        assert value == 1.0

    def test_full_cross_product_maximizes_over_pairs(self, design):
        full = replace(design, pair_policy="full-cross-product")
        matrix = column_matrix(full, "q1", "disk", {
            ("SSD", 5.0): (100.0, 100.0, 100.0),  # best CRI 0.0
            ("SSD", 10.0): (80.0, 50.0, 40.0),    # best CRI 0.75
        })
        value, _ = mri(matrix, full, "q1", "disk")
        assert value == pytest.approx(0.25, abs=APPROX)


class TestComputeAll:
    def test_reference_fixture_quadruples(self):
        from freqsight.fixtures import REFERENCE_TARGETS, reference_design, reference_records
        from freqsight.report import aggregate

        design = reference_design()
        matrix = aggregate(reference_records(), design)
        for mode, (cri_t, mri_t, dri_t, nri_t) in REFERENCE_TARGETS.items():
            ind = compute_all(matrix, design, "sql-mix", mode)
            assert ind.cri == pytest.approx(cri_t, abs=1e-9)
            assert ind.mri == pytest.approx(mri_t, abs=1e-9)
            assert ind.dri == pytest.approx(dri_t, abs=1e-9)
            assert ind.nri == pytest.approx(nri_t, abs=1e-9)

    def test_all_cells_equal(self, design):
        # Runtimes unmoved by frequency and upgrades: no CPU, disk, or
        # network impact, while the whole residual lands on memory.
        col = (75.0, 75.0, 75.0)
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): col, ("SSD", 1.0): col, ("HDD", 5.0): col,
            ("HDD", 10.0): col, ("SSD", 10.0): col,
        })
        ind = compute_all(matrix, design, "q1", "disk")
        assert (ind.cri, ind.dri, ind.nri) == (0.0, 0.0, 0.0)
        assert ind.mri == 1.0

    def test_missing_cells_reported_absent_not_zero(self, design):
        matrix = column_matrix(design, "q1", "disk", {
            ("HDD", 1.0): (100.0, 70.0, 60.0),
        })
        ind = compute_all(matrix, design, "q1", "disk")
        assert ind.cri == pytest.approx(0.6, abs=APPROX)
        assert ind.dri is None and ind.nri is None and ind.mri is None
        assert Flag.INCOMPLETE_MATRIX in ind.flags
        assert set(ind.absent()) == {MRI, DRI, NRI}

    def test_requesting_unsupported_indicator_rejected(self, design):
        cri_only = replace(design, disk_tiers=(), network_bws=())
        matrix = column_matrix(cri_only, "q1", "disk", {("HDD", 1.0): (100.0, 70.0, 60.0)})
        with pytest.raises(InvalidInputError):
            compute_all(matrix, cri_only, "q1", "disk", indicators=(DRI,))

    def test_subset_request(self, design):
        matrix = column_matrix(design, "q1", "disk", {("HDD", 1.0): (100.0, 70.0, 60.0)})
        ind = compute_all(matrix, design, "q1", "disk", indicators=(CRI,))
        assert ind.cri is not None
        assert ind.absent() == (MRI, DRI, NRI)
        assert Flag.INCOMPLETE_MATRIX not in ind.flags


class TestRankBottleneck:
    def test_disk_mode_averages(self):
        ind = IndicatorSet("avg", "disk", cri=0.61, mri=0.16, dri=0.24, nri=0.02)
        ranking = rank_bottleneck(ind)
        assert ranking.bottleneck == "cpu"
        assert [r for (r, _) in ranking.order] == ["cpu", "disk", "memory", "network"]

    def test_memory_mode_averages(self):
        ind = IndicatorSet("avg", "memory", cri=0.53, mri=0.30, dri=0.20, nri=0.06)
        ranking = rank_bottleneck(ind)
        assert [r for (r, _) in ranking.order] == ["cpu", "memory", "disk", "network"]

    def test_four_way_tie_groups_and_fixed_order(self):
        ind = IndicatorSet("t", "disk", cri=0.5, mri=0.5, dri=0.5, nri=0.5)
        ranking = rank_bottleneck(ind)
        assert [r for (r, _) in ranking.order] == ["cpu", "memory", "disk", "network"]
        assert ranking.ties == (("cpu", "memory", "disk", "network"),)

    def test_runs_on_present_subset(self):
        ind = IndicatorSet("t", "disk", cri=0.4, dri=0.6)
        ranking = rank_bottleneck(ind)
        assert ranking.bottleneck == "disk"
        assert len(ranking.order) == 2

    def test_empty_set_rejected(self):
        with pytest.raises(InvalidInputError):
            rank_bottleneck(IndicatorSet("t", "disk"))

    def test_output_is_permutation_of_present(self):
        ind = IndicatorSet("t", "memory", cri=0.3, mri=0.7, dri=0.1, nri=0.05)
        ranking = rank_bottleneck(ind)
        assert sorted(r for (r, _) in ranking.order) == sorted(ind.present())


class TestDiagnose:
    def util(self, cpu=50.0, disk=50.0, net=50.0):
        return UtilizationSummary(cpu, disk, net)

    def test_high_cpu_util_low_cri(self):
        ind = IndicatorSet("q", "disk", cri=0.2, mri=0.1, dri=0.1, nri=0.0)
        report = diagnose(ind, self.util(cpu=80.0))
        assert [c.code for c in report.codes] == ["HIGH_CPUUTIL_LOW_CRI"]
        assert ("cri", 0.2) in report.codes[0].values

    def test_low_cpu_util_high_cri(self):
        ind = IndicatorSet("tpcds", "disk", cri=0.58, mri=0.1, dri=0.25, nri=0.0)
        report = diagnose(ind, self.util(cpu=17.0))
        assert "LOW_CPUUTIL_HIGH_CRI" in [c.code for c in report.codes]

    def test_low_disk_util_high_dri_threshold_relative(self):
        # 0.25 counts as a high disk indicator only with a lowered cut.
        ind = IndicatorSet("tpcds", "disk", cri=0.58, mri=0.1, dri=0.25, nri=0.0)
        report = diagnose(ind, self.util(cpu=45.0, disk=10.0), Thresholds(ri_high=0.2))
        assert "LOW_DISKUTIL_HIGH_DRI" in [c.code for c in report.codes]

    def test_high_disk_util_low_dri(self):
        ind = IndicatorSet("q", "disk", cri=0.6, mri=0.1, dri=0.1, nri=0.0)
        report = diagnose(ind, self.util(disk=85.0))
        assert "HIGH_DISKUTIL_LOW_DRI" in [c.code for c in report.codes]

    def test_absent_utilization_yields_note(self):
        ind = IndicatorSet("q", "disk", cri=0.6)
        report = diagnose(ind, None)
        assert report.codes == ()
        assert report.notes

    def test_absent_indicators_skip_rules(self):
        ind = IndicatorSet("q", "disk")
        report = diagnose(ind, self.util())
        assert report.codes == ()
        assert len(report.notes) == 2

    def test_thresholds_echoed(self):
        t = Thresholds(util_high=70.0)
        report = diagnose(IndicatorSet("q", "disk", cri=0.5), self.util(), t)
        assert report.thresholds == t


# ---------------------------------------------------------------------------
# Properties

from freqsight.fixtures import reference_design

DESIGN = reference_design(replicates=1)
RESOURCE_COLS = [("HDD", 1.0), ("SSD", 1.0), ("HDD", 5.0), ("HDD", 10.0), ("SSD", 10.0)]

runtime_grid = st.integers(min_value=1, max_value=2000).map(lambda i: i * 10.0)
column_strategy = st.tuples(runtime_grid, runtime_grid, runtime_grid)
matrix_strategy = st.fixed_dictionaries({cfg: column_strategy for cfg in RESOURCE_COLS})


@settings(max_examples=60, deadline=None)
@given(columns=matrix_strategy)
def test_indicators_bounded_after_clamping(columns):
    matrix = column_matrix(DESIGN, "q1", "disk", columns)
    ind = compute_all(matrix, DESIGN, "q1", "disk")
    values = [v for v in (ind.cri, ind.mri, ind.dri, ind.nri) if v is not None]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert 0.0 <= sum(values) <= 4.0


@settings(max_examples=40, deadline=None)
@given(columns=matrix_strategy, exponent=st.integers(min_value=-8, max_value=8))
def test_scale_invariance_under_power_of_two(columns, exponent):
    # Powers of two rescale floats exactly, so equality must be bitwise.
    k = 2.0 ** exponent
    matrix = column_matrix(DESIGN, "q1", "disk", columns)
    before = compute_all(matrix, DESIGN, "q1", "disk")
    after = compute_all(matrix.scaled(k), DESIGN, "q1", "disk")
    assert (before.cri, before.mri, before.dri, before.nri) == (
        after.cri, after.mri, after.dri, after.nri)
    assert before.flags == after.flags


@settings(max_examples=40, deadline=None)
@given(columns=matrix_strategy, k=st.floats(min_value=1e-3, max_value=1e4,
                                            allow_nan=False, allow_infinity=False))
def test_scale_invariance_approximate_for_any_factor(columns, k):
    matrix = column_matrix(DESIGN, "q1", "disk", columns)
    before = compute_all(matrix, DESIGN, "q1", "disk")
    after = compute_all(matrix.scaled(k), DESIGN, "q1", "disk")
    for ind in INDICATORS:
        assert after.value(ind) == pytest.approx(before.value(ind), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(columns=matrix_strategy, extra_col=column_strategy)
def test_dri_never_decreases_when_adding_a_tier(columns, extra_col):
    wider = replace(DESIGN, disk_tiers=("SSD", "RAMDISK"))
    matrix_small = column_matrix(DESIGN, "q1", "disk", columns)
    matrix_big = column_matrix(wider, "q1", "disk", {**columns, ("RAMDISK", 1.0): extra_col})
    small_value, _ = dri(matrix_small, DESIGN, "q1", "disk")
    big_value, _ = dri(matrix_big, wider, "q1", "disk")
    assert big_value >= small_value


@settings(max_examples=40, deadline=None)
@given(columns=matrix_strategy, exponent=st.integers(min_value=-6, max_value=6))
def test_argmax_invariant_under_uniform_scaling(columns, exponent):
    matrix = column_matrix(DESIGN, "q1", "disk", columns)
    before = rank_bottleneck(compute_all(matrix, DESIGN, "q1", "disk"))
    after = rank_bottleneck(compute_all(matrix.scaled(2.0 ** exponent), DESIGN, "q1", "disk"))
    assert before.bottleneck == after.bottleneck
