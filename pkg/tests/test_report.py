import json
from dataclasses import replace

import pytest

import freqsight as fs
from freqsight import (
    IndicatorSet,
    ResourceScheme,
    RunRecord,
    UtilizationSummary,
    aggregate,
    build_report,
    emit_plot_data,
    parse_runs,
    render_report,
)
from freqsight.errors import InvalidInputError, ParseError, UnmatchedRecordError
from freqsight.fixtures import reference_design, reference_records
from freqsight.report import (
    RUNS_CSV_HEADER,
    attach_utilization,
    indicator_average,
    indicator_sets_from_csv,
    parse_scale_observations,
    parse_utilization,
    plan_from_document,
    plan_to_document,
    records_to_document,
    report_from_document,
    report_to_document,
    utilization_by_pair,
    workload_from_document,
    workload_to_document,
    write_records_csv,
)

HEADER = ",".join(RUNS_CSV_HEADER)


class TestParseRuns:
    def test_csv_row_maps_to_record(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text(HEADER + "\nq1,disk,1.2,DDR3-1600,HDD,1,1,103.5,\n")
        records = parse_runs(path)
        assert records == [RunRecord(
            "q1", "disk", ResourceScheme(1.2, "DDR3-1600", "HDD", 1.0), 1, 103.5,
        )]

    def test_negative_runtime_names_the_row(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text(HEADER + "\nq1,disk,1.2,DDR3-1600,HDD,1,1,-5,\n")
        with pytest.raises(ParseError) as err:
            parse_runs(path)
        assert ":2" in str(err.value)

    def test_header_mismatch_fails_closed(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ParseError):
            parse_runs(path)

    def test_malformed_field_count(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text(HEADER + "\nq1,disk,1.2\n")
        with pytest.raises(ParseError) as err:
            parse_runs(path)
        assert ":2" in str(err.value)

    def test_bad_warmup_token(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text(HEADER + "\nq1,disk,1.2,DDR3-1600,HDD,1,1,10,maybe\n")
        with pytest.raises(ParseError):
            parse_runs(path)

    def test_json_warmup_record_excluded_from_aggregation(self, tmp_path, design):
        records = [
            RunRecord("q1", "memory", design.baseline, 1, 400.0, warmup=True),
            RunRecord("q1", "memory", design.baseline, 1, 100.0),
        ]
        path = tmp_path / "runs.json"
        path.write_text(json.dumps(records_to_document(records)))
        parsed = parse_runs(path)
        assert [r.warmup for r in parsed] == [True, False]
        matrix = aggregate(parsed, design)
        assert matrix.stats("q1", "memory", design.baseline).n_samples == 1
        assert matrix.runtime("q1", "memory", design.baseline) == 100.0

    def test_csv_round_trip(self, tmp_path, design):
        records = reference_records()[:7]
        path = tmp_path / "out.csv"
        write_records_csv(records, path)
        assert parse_runs(path) == records


class TestAggregate:
    def test_mean_over_replicates(self, design):
        design3 = reference_design(replicates=3)
        records = [
            RunRecord("q1", "disk", design.baseline, i + 1, rt)
            for i, rt in enumerate((100.0, 104.0, 96.0))
        ]
        matrix = aggregate(records, design3)
        stats = matrix.stats("q1", "disk", design.baseline)
        assert stats.mean_runtime_s == 100.0
        assert stats.n_samples == 3

    def test_under_replicated_cell_is_flagged(self):
        design = reference_design(replicates=3)
        records = [
            RunRecord("sql-mix", "disk", r.scheme, rep, r.runtime_s)
            for r in reference_records()
            if r.mode == "disk"
            for rep in (1, 2)  # only 2 of 3 replicates
        ]
        doc = build_report(records, design)
        under = doc.completeness.under_replicated
        assert under and all(c.n_samples == 2 for c in under)

    def test_off_design_frequency_is_unmatched(self, design):
        record = RunRecord("q1", "disk", design.baseline.with_freq(2.0), 1, 50.0)
        with pytest.raises(UnmatchedRecordError) as err:
            aggregate([record], design)
        assert err.value.records == (record,)

    def test_tolerant_frequency_match_aggregates_canonically(self, design):
        record = RunRecord("q1", "disk", design.baseline.with_freq(1.2000000008), 1, 50.0)
        matrix = aggregate([record], design)
        assert matrix.runtime("q1", "disk", design.baseline) == 50.0

    def test_unselected_pair_is_unmatched(self, design):
        # best-pair-only: (SSD, 5.0) is not a design cell
        scheme = design.baseline.with_io("SSD", 5.0)
        with pytest.raises(UnmatchedRecordError):
            aggregate([RunRecord("q1", "disk", scheme, 1, 50.0)], design)

    def test_mode_outside_design_is_unmatched(self, design):
        memoryless = replace(design, modes=("disk",))
        record = RunRecord("q1", "memory", design.baseline, 1, 50.0)
        with pytest.raises(UnmatchedRecordError):
            aggregate([record], memoryless)


class TestUtilization:
    def test_parse_and_attach(self, tmp_path, design):
        runs = tmp_path / "runs.csv"
        runs.write_text(HEADER + "\nq1,disk,1.2,DDR3-1600,HDD,1,1,103.5,\n")
        util = tmp_path / "util.csv"
        util.write_text(
            "workload,mode,cpu_freq_ghz,memory_tier,disk_tier,network_gbps,replicate,"
            "cpu_util_pct,disk_bw_util_pct,net_bw_util_pct\n"
            "q1,disk,1.2,DDR3-1600,HDD,1,1,17,40,5\n"
        )
        records = attach_utilization(parse_runs(runs), parse_utilization(util))
        assert records[0].utilization == UtilizationSummary(17.0, 40.0, 5.0)
        pairs = utilization_by_pair(records, design)
        assert pairs[("q1", "disk")].cpu_util_pct == 17.0

    def test_upgraded_config_records_do_not_dilute(self, design):
        base = design.baseline
        records = [
            RunRecord("q1", "disk", base, 1, 100.0, utilization=UtilizationSummary(20.0, 10.0, 5.0)),
            RunRecord("q1", "disk", base.with_io("SSD", 1.0), 1, 80.0,
                      utilization=UtilizationSummary(90.0, 90.0, 90.0)),
        ]
        pairs = utilization_by_pair(records, design)
        assert pairs[("q1", "disk")].cpu_util_pct == 20.0

    def test_out_of_range_utilization_rejected(self, tmp_path):
        util = tmp_path / "util.csv"
        util.write_text(
            "workload,mode,cpu_freq_ghz,memory_tier,disk_tier,network_gbps,replicate,"
            "cpu_util_pct,disk_bw_util_pct,net_bw_util_pct\n"
            "q1,disk,1.2,DDR3-1600,HDD,1,1,170,40,5\n"
        )
        with pytest.raises(ParseError):
            parse_utilization(util)


class TestRenderReport:
    @pytest.fixture
    def doc(self):
        return build_report(reference_records(), reference_design(), with_diagnosis=False)

    def test_text_table_shape(self, doc):
        text = render_report(doc, "text")
        lines = text.splitlines()
        cri_disk = next(l for l in lines if l.startswith("CRI") and " disk" in l)
        assert cri_disk.split()[-2:] == ["0.61", "0.61"]  # workload column + avg
        nri_memory = next(l for l in lines if l.startswith("NRI") and " memory" in l)
        assert nri_memory.split()[-1] == "0.06"
        assert any("ranking" in l for l in lines)
        assert any(l.startswith("completeness:") for l in lines)

    def test_text_is_byte_stable(self, doc):
        assert render_report(doc, "text") == render_report(doc, "text")

    def test_json_round_trip_restores_equal_document(self, doc):
        payload = json.loads(render_report(doc, "json"))
        assert report_from_document(payload) == doc

    def test_csv_round_trip_restores_indicator_sets(self, doc):
        text = render_report(doc, "csv")
        sets = indicator_sets_from_csv(text)
        assert sets == [e.indicators for e in doc.entries]

    def test_unknown_format_rejected(self, doc):
        with pytest.raises(InvalidInputError):
            render_report(doc, "pdf")

    def test_averages_match_entries(self, doc):
        assert indicator_average(doc.entries, "disk", "CRI") == pytest.approx(0.61, abs=1e-9)
        assert indicator_average(doc.entries, "memory", "MRI") == pytest.approx(0.30, abs=1e-9)

    def test_header_only_table_for_empty_matrix(self, design):
        doc = build_report([], design)
        text = render_report(doc, "text")
        assert any(l.startswith("indicator") for l in text.splitlines())
        value_rows = [l for l in text.splitlines()
                      if l.split() and l.split()[0] in fs.INDICATORS]
        assert value_rows and all(row.split()[-1] == "-" for row in value_rows)
        assert "completeness: 0 cells present" in text

    def test_diagnosis_rendered_when_present(self):
        design = reference_design()
        base = design.baseline
        records = [
            RunRecord("sql-mix", r.mode, r.scheme, r.replicate, r.runtime_s,
                      utilization=(UtilizationSummary(17.0, 20.0, 5.0)
                                   if r.scheme == base else None))
            for r in reference_records()
        ]
        doc = build_report(records, design)
        text = render_report(doc, "text")
        assert "LOW_CPUUTIL_HIGH_CRI" in text


class TestPlotData:
    def test_two_modes_group_structure(self):
        sets = [
            IndicatorSet("q1", "disk", cri=0.6, mri=0.1, dri=0.2, nri=0.05),
            IndicatorSet("q1", "memory", cri=0.5, mri=0.3, dri=0.2, nri=0.06),
        ]
        payload = emit_plot_data(sets, group_by="mode")
        groups = {p["group"] for p in payload["series"]}
        assert groups == {"disk", "memory"}
        assert len(payload["series"]) == 8

    def test_values_echo_exactly(self):
        sets = [IndicatorSet("q1", "disk", cri=0.123456789, mri=0.1, dri=0.2, nri=0.05)]
        payload = emit_plot_data(sets, group_by="indicator")
        cri_point = next(p for p in payload["series"] if p["indicator"] == "CRI")
        assert cri_point["value"] == 0.123456789

    def test_single_workload_single_mode(self):
        payload = emit_plot_data([IndicatorSet("q1", "disk", cri=0.6)])
        assert len(payload["series"]) == 1

    def test_empty_input_rejected(self):
        with pytest.raises(InvalidInputError):
            emit_plot_data([])

    def test_unknown_grouping_rejected(self):
        with pytest.raises(InvalidInputError):
            emit_plot_data([IndicatorSet("q1", "disk", cri=0.6)], group_by="color")


class TestDocuments:
    def test_workload_model_round_trip(self, design):
        workload = fs.gen_random_workload(11, fs.WorkloadParams(design))
        assert workload_from_document(workload_to_document(workload)) == workload

    def test_plan_round_trip(self):
        design = reference_design(replicates=2)
        plan = fs.build_run_matrix(design, ["q1", "q2"])
        assert plan_from_document(plan_to_document(plan)) == plan

    def test_scale_observation_csv(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("scale,machines,runtime_s\n100,1,1003\n100,2,511.5\n")
        assert parse_scale_observations(path) == [(100.0, 1.0, 1003.0), (100.0, 2.0, 511.5)]

    def test_scale_observation_bad_row(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("scale,machines,runtime_s\n100,xx,1\n")
        with pytest.raises(ParseError):
            parse_scale_observations(path)


def test_full_pipeline_is_byte_deterministic(tmp_path):
    design = reference_design()
    records = reference_records()
    outputs = []
    for _ in range(2):
        doc = build_report(records, design)
        outputs.append((
            render_report(doc, "text"),
            render_report(doc, "csv"),
            render_report(doc, "json"),
        ))
    assert outputs[0] == outputs[1]


def test_completeness_lists_every_consumed_cell():
    design = reference_design()
    doc = build_report(reference_records(), design, with_diagnosis=False)
    listed = {(c.workload_id, c.mode, c.scheme) for c in doc.completeness.cells}
    for entry in doc.entries:
        pair = (entry.indicators.workload_id, entry.indicators.mode)
        for (mode, scheme) in fs.required_cells(
                design, fs.supported_indicators(design), modes=(pair[1],)):
            assert (pair[0], mode, scheme) in listed
    assert not doc.completeness.missing
    assert not doc.incomplete()


def test_report_csv_round_trips_absent_values():
    from freqsight.report import REPORT_CSV_HEADER, render_csv
    from freqsight.report import CompletenessSummary, ReportDocument, ReportEntry

    partial = IndicatorSet("q9", "disk", cri=0.4, flags=frozenset({fs.Flag.INCOMPLETE_MATRIX}))
    doc = ReportDocument(
        design=reference_design(),
        entries=(ReportEntry(indicators=partial),),
        completeness=CompletenessSummary(cells=(), missing=()),
        flags_legend={},
    )
    sets = indicator_sets_from_csv(render_csv(doc))
    assert sets == [partial]
