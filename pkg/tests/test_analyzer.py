import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semo import (
    AttributionResult,
    BatteryStatus,
    ChargeCounterUnavailable,
    EnergyAttributor,
    INSEPARABLE_FLAG,
    NotFittedError,
    TooFewSamples,
    attribute,
    build_intervals,
    merge_identifiability_groups,
    rate_to_power,
    export_csv,
    simulate,
)
from semo.nnls import weighted_sse

from _helpers import make_record, random_exact_scenario

MIN = 60_000  # one minute in ms
HOUR = 3_600_000


def records_from_segments(segments, start_level=100, step_ms=MIN):
    """Build a discharging log from (n_steps, drop_per_step, apps) segments."""
    records = []
    ts, level = 0, start_level
    apps_now = segments[0][2]
    for n_steps, drop, apps in segments:
        apps_now = apps
        for _ in range(n_steps):
            records.append(make_record(ts, level, apps=apps_now))
            ts += step_ms
            level -= drop
    records.append(make_record(ts, level, apps=apps_now))
    return records


class TestBuildIntervals:
    def test_single_pair_rate(self):
        records = [make_record(0, 80, apps=("A",)), make_record(MIN, 79, apps=("A",))]
        intervals = build_intervals(records)
        assert len(intervals) == 1
        assert intervals[0].rate_pct_per_h == pytest.approx(60.0)
        assert intervals[0].active == ("A",)

    def test_charging_pair_excluded_neighbors_kept(self):
        records = [
            make_record(0 * MIN, 80, apps=("A",)),
            make_record(1 * MIN, 79, apps=("A",)),
            make_record(2 * MIN, 79, apps=("A",), status=BatteryStatus.CHARGING),
            make_record(3 * MIN, 80, apps=("A",), status=BatteryStatus.CHARGING),
            make_record(4 * MIN, 80, apps=("A",)),
            make_record(5 * MIN, 79, apps=("A",)),
        ]
        intervals = build_intervals(records)
        assert [(iv.t_start_ms, iv.t_end_ms) for iv in intervals] == [(0, MIN), (4 * MIN, 5 * MIN)]

    @pytest.mark.parametrize("status", [BatteryStatus.FULL, BatteryStatus.UNKNOWN, BatteryStatus.NOT_CHARGING])
    def test_non_discharging_statuses_excluded(self, status):
        records = [
            make_record(0, 80, apps=("A",)),
            make_record(MIN, 79, apps=("A",), status=status, voltage_mv=3900),
            make_record(2 * MIN, 78, apps=("A",)),
            make_record(3 * MIN, 77, apps=("A",)),
        ]
        intervals = build_intervals(records)
        assert [(iv.t_start_ms, iv.t_end_ms) for iv in intervals] == [(2 * MIN, 3 * MIN)]

    def test_same_active_set_coalesces(self):
        records = [
            make_record(0, 80, apps=("A",)),
            make_record(MIN, 80, apps=("A",)),
            make_record(2 * MIN, 79, apps=("A",)),
        ]
        intervals = build_intervals(records)
        assert len(intervals) == 1
        assert intervals[0].duration_h == pytest.approx(2 / 60)
        assert intervals[0].rate_pct_per_h == pytest.approx(30.0)

    def test_active_set_change_breaks_coalescing(self):
        records = [
            make_record(0, 80, apps=("A",)),
            make_record(MIN, 79, apps=("B",)),
            make_record(2 * MIN, 78, apps=("B",)),
        ]
        intervals = build_intervals(records)
        assert [iv.active for iv in intervals] == [("A",), ("B",)]

    def test_no_coalescing_across_excluded_pairs(self):
        # same active set on both sides of the gap, but not time-contiguous
        records = [
            make_record(0, 80, apps=("A",)),
            make_record(MIN, 79, apps=("A",)),
            make_record(2 * MIN, 85, apps=("A",)),
            make_record(3 * MIN, 84, apps=("A",)),
            make_record(4 * MIN, 83, apps=("A",)),
        ]
        intervals = build_intervals(records)
        assert [(iv.t_start_ms, iv.t_end_ms) for iv in intervals] == [(0, MIN), (2 * MIN, 4 * MIN)]

    def test_active_set_is_start_snapshot(self):
        records = [make_record(0, 80, apps=("A",)), make_record(MIN, 79, apps=("B",))]
        assert build_intervals(records)[0].active == ("A",)

    def test_level_rise_between_discharging_samples_excluded(self):
        # a rise is evidence of hidden charging, not a zero-drop discharge
        records = [
            make_record(0, 80, apps=("A",)),
            make_record(MIN, 79, apps=("A",)),
            make_record(2 * MIN, 85, apps=("A",)),
            make_record(3 * MIN, 84, apps=("A",)),
        ]
        intervals = build_intervals(records)
        assert [(iv.t_start_ms, iv.t_end_ms) for iv in intervals] == [(0, MIN), (2 * MIN, 3 * MIN)]

    def test_too_few_records(self):
        with pytest.raises(TooFewSamples):
            build_intervals([make_record(0, 80)])

    def test_no_usable_pairs(self):
        records = [
            make_record(0, 80, status=BatteryStatus.CHARGING),
            make_record(MIN, 81, status=BatteryStatus.CHARGING),
        ]
        with pytest.raises(TooFewSamples):
            build_intervals(records)

    def test_unsorted_records_rejected(self):
        records = [make_record(MIN, 80), make_record(0, 81)]
        with pytest.raises(ValueError):
            build_intervals(records)


class TestChargeCounter:
    def cc_records(self):
        # 1_000_000 µAh full scale; the counter moves inside one level unit
        return [
            make_record(0, 100, apps=("A",), charge_uah=1_000_000),
            make_record(MIN, 99, apps=("A",), charge_uah=995_000),
            make_record(2 * MIN, 99, apps=("A",), charge_uah=990_000),
        ]

    def test_auto_prefers_counter(self):
        intervals = build_intervals(self.cc_records(), "auto")
        assert len(intervals) == 1  # coalesced: same active set
        assert intervals[0].drop_pct == pytest.approx(1.0)  # 10_000 µAh of 1_000_000

    def test_off_uses_levels(self):
        intervals = build_intervals(self.cc_records(), "off")
        assert intervals[0].drop_pct == pytest.approx(1.0)  # level 100 -> 99 then flat
        assert len(intervals) == 1

    def test_full_scale_from_best_populated_sample(self):
        # highest-level sample pins full scale: 990_000/90*100 = 1_100_000
        records = [
            make_record(0, 90, apps=("A",), charge_uah=990_000),
            make_record(MIN, 89, apps=("B",), charge_uah=979_000),
            make_record(2 * MIN, 88, apps=("B",), charge_uah=968_000),
        ]
        intervals = build_intervals(records, "on")
        assert [iv.drop_pct for iv in intervals] == [pytest.approx(1.0), pytest.approx(1.0)]
        assert [iv.active for iv in intervals] == [("A",), ("B",)]

    def test_on_without_counter_raises(self):
        records = [make_record(0, 80), make_record(MIN, 79)]
        with pytest.raises(ChargeCounterUnavailable):
            build_intervals(records, "on")

    def test_on_with_partial_counter_raises(self):
        records = [
            make_record(0, 80, charge_uah=800_000),
            make_record(MIN, 79, charge_uah=None),
        ]
        with pytest.raises(ChargeCounterUnavailable):
            build_intervals(records, "on")

    def test_auto_falls_back_per_pair(self):
        records = [
            make_record(0, 80, apps=("A",), charge_uah=800_000),
            make_record(MIN, 79, apps=("B",)),
            make_record(2 * MIN, 78, apps=("B",), charge_uah=780_000),
        ]
        intervals = build_intervals(records, "auto")
        assert [iv.drop_pct for iv in intervals] == [1.0, 1.0]

    def test_charge_rise_excluded(self):
        records = [
            make_record(0, 80, apps=("A",), charge_uah=800_000),
            make_record(MIN, 80, apps=("A",), charge_uah=810_000),
            make_record(2 * MIN, 79, apps=("A",), charge_uah=790_000),
        ]
        intervals = build_intervals(records, "auto")
        assert [(iv.t_start_ms, iv.t_end_ms) for iv in intervals] == [(MIN, 2 * MIN)]

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            build_intervals(self.cc_records(), "sometimes")


class TestMergeGroups:
    def test_identical_patterns_merge(self):
        records = records_from_segments([(2, 1, ()), (2, 1, ("A", "B"))])
        grouping = merge_identifiability_groups(build_intervals(records))
        assert grouping.groups == (("A", "B"),)

    def test_distinct_patterns_stay_separate(self):
        # A active in intervals 1 and 2, B only in 2
        records = records_from_segments([(2, 1, ("A",)), (2, 1, ("A", "B")), (2, 1, ())])
        grouping = merge_identifiability_groups(build_intervals(records))
        assert grouping.groups == (("A",), ("B",))
        assert grouping.inseparable == ()

    def test_design_matrix_shape_and_baseline_column(self):
        records = records_from_segments([(2, 1, ()), (2, 1, ("A",)), (2, 1, ("B",))])
        intervals = build_intervals(records)
        grouping = merge_identifiability_groups(intervals)
        assert grouping.design.shape == (len(intervals), 1 + len(grouping.groups))
        np.testing.assert_array_equal(grouping.design[:, 0], np.ones(len(intervals)))

    def test_always_on_app_is_inseparable(self):
        records = records_from_segments([(2, 1, ("A",)), (2, 1, ("A", "B"))])
        grouping = merge_identifiability_groups(build_intervals(records))
        assert grouping.inseparable == ("A",)
        assert grouping.groups == (("B",),)

    def test_unobserved_from_universe(self):
        records = records_from_segments([(2, 1, ("A",))])
        grouping = merge_identifiability_groups(build_intervals(records), all_apps={"A", "ghost"})
        assert grouping.unobserved == ("ghost",)

    def test_empty_intervals_rejected(self):
        with pytest.raises(TooFewSamples):
            merge_identifiability_groups([])


class TestAttribute:
    def exact_additive_records(self):
        # hour-long spans with active sets {}, {A}, {B}, {A,B} and
        # drain rates 2, 5, 7, 10 pct/h
        records = [
            make_record(0 * HOUR, 100, apps=()),
            make_record(1 * HOUR, 98, apps=("A",)),
            make_record(2 * HOUR, 93, apps=("B",)),
            make_record(3 * HOUR, 86, apps=("A", "B")),
            make_record(4 * HOUR, 76, apps=()),
        ]
        return records

    def test_additive_model_recovered(self):
        result = attribute(self.exact_additive_records())
        assert result.baseline_pct_per_h == pytest.approx(2.0, abs=1e-9)
        rates = {g.apps: g.rate_pct_per_h for g in result.groups}
        assert rates[("A",)] == pytest.approx(3.0, abs=1e-9)
        assert rates[("B",)] == pytest.approx(5.0, abs=1e-9)
        assert result.residual_rms == pytest.approx(0.0, abs=1e-9)
        assert [g.apps for g in result.ranking] == [("B",), ("A",)]

    def test_equal_rates_rank_lexicographically(self):
        records = [
            make_record(0 * HOUR, 100, apps=()),
            make_record(1 * HOUR, 98, apps=("zeta",)),
            make_record(2 * HOUR, 93, apps=("alpha",)),
            make_record(3 * HOUR, 88, apps=()),
        ]
        result = attribute(records)
        assert [g.apps for g in result.ranking] == [("alpha",), ("zeta",)]

    def test_single_app_with_idle_gets_marginal(self):
        records = [
            make_record(0 * HOUR, 100, apps=("A",)),
            make_record(1 * HOUR, 95, apps=()),
            make_record(2 * HOUR, 93, apps=()),
        ]
        result = attribute(records)
        assert result.baseline_pct_per_h == pytest.approx(2.0, abs=1e-9)
        assert result.groups[0].apps == ("A",)
        assert result.groups[0].rate_pct_per_h == pytest.approx(3.0, abs=1e-9)
        assert result.groups[0].flags == ()

    def test_always_running_app_folds_into_baseline(self):
        records = [
            make_record(0 * HOUR, 100, apps=("A",)),
            make_record(1 * HOUR, 95, apps=("A",)),
            make_record(2 * HOUR, 90, apps=("A",)),
        ]
        result = attribute(records)
        assert result.baseline_pct_per_h == pytest.approx(5.0, abs=1e-9)
        assert len(result.groups) == 1
        group = result.groups[0]
        assert group.apps == ("A",)
        assert group.flags == (INSEPARABLE_FLAG,)
        assert group.rate_pct_per_h == 0.0
        assert result.ranking == result.groups

    def test_app_seen_only_in_charging_spans_is_invisible(self):
        records = [
            make_record(0, 100, apps=("A",)),
            make_record(MIN, 99, apps=("A",)),
            make_record(2 * MIN, 99, apps=("A", "plugonly"), status=BatteryStatus.CHARGING),
            make_record(3 * MIN, 99, apps=("A",)),
            make_record(4 * MIN, 98, apps=("A",)),
        ]
        result = attribute(records)
        all_named = {name for g in result.groups for name in g.apps} | set(result.unobserved)
        assert "plugonly" not in all_named

    def test_app_in_boundary_sample_only_is_unobserved(self):
        records = [
            make_record(0, 100, apps=("A",)),
            make_record(MIN, 99, apps=("A",)),
            make_record(2 * MIN, 99, apps=("A", "fleeting"), status=BatteryStatus.CHARGING),
            make_record(3 * MIN, 99, apps=("A", "fleeting")),
            make_record(4 * MIN, 99, apps=("A",), status=BatteryStatus.CHARGING),
            make_record(5 * MIN, 99, apps=("A",)),
            make_record(6 * MIN, 98, apps=("A",)),
        ]
        result = attribute(records)
        assert result.unobserved == ("fleeting",)

    def test_propagates_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            attribute([make_record(0, 80)])

    def test_charging_exclusion_equivalence(self):
        records = [
            make_record(0, 90, apps=("A",), charge_uah=1_800_000),
            make_record(MIN, 89, apps=("A",), charge_uah=1_782_000),
            make_record(2 * MIN, 89, apps=("A", "B"), charge_uah=1_778_000),
            make_record(3 * MIN, 91, apps=("B",), status=BatteryStatus.CHARGING, charge_uah=1_820_000),
            make_record(4 * MIN, 94, apps=("B",), status=BatteryStatus.CHARGING, charge_uah=1_880_000),
            make_record(5 * MIN, 95, apps=("B",), charge_uah=1_900_000),
            make_record(6 * MIN, 94, apps=("B",), charge_uah=1_882_000),
            make_record(7 * MIN, 94, apps=(), charge_uah=1_878_000),
        ]
        pruned = [r for r in records if r.sample.status is not BatteryStatus.CHARGING]
        assert len(pruned) < len(records)
        for mode in ("auto", "off"):
            assert attribute(records, mode) == attribute(pruned, mode)

    def test_ranking_invariant_under_time_rescale(self):
        records = self.exact_additive_records()
        result = attribute(records)
        for factor in (3, 10):
            scaled = [
                make_record(r.sample.ts_ms * factor, r.sample.level_pct, apps=r.apps)
                for r in records
            ]
            rescaled = attribute(scaled)
            assert [g.apps for g in rescaled.ranking] == [g.apps for g in result.ranking]
            for a, b in zip(rescaled.ranking, result.ranking):
                assert a.rate_pct_per_h == pytest.approx(b.rate_pct_per_h / factor)


@st.composite
def random_logs(draw):
    n_apps = draw(st.integers(1, 4))
    names = [f"app{i}" for i in range(n_apps)]
    n_segments = draw(st.integers(1, 6))
    segments = []
    for _ in range(n_segments):
        segment_apps = draw(st.sets(st.sampled_from(names)))
        steps = draw(st.integers(1, 3))
        drop = draw(st.integers(0, 2))
        segments.append((steps, drop, tuple(sorted(segment_apps))))
    # max total drop 6*3*2 = 36, so a start of 100 never goes negative
    return records_from_segments(segments, start_level=100)


class TestResultInvariants:
    @settings(max_examples=60, deadline=None)
    @given(records=random_logs())
    def test_partition_and_feasibility(self, records):
        try:
            result = attribute(records)
        except TooFewSamples:
            return
        universe = {
            name
            for r in records
            if r.sample.status is BatteryStatus.DISCHARGING
            for name in r.apps
        }
        named = [name for g in result.groups for name in g.apps] + list(result.unobserved)
        assert sorted(named) == sorted(universe)
        assert result.baseline_pct_per_h >= 0
        assert all(g.rate_pct_per_h >= 0 for g in result.groups)
        assert result.residual_rms >= 0
        assert sorted(g.apps for g in result.ranking) == sorted(g.apps for g in result.groups)

    @settings(max_examples=40, deadline=None)
    @given(records=random_logs())
    def test_local_optimality_of_fit(self, records):
        try:
            intervals = build_intervals(records)
        except TooFewSamples:
            return
        grouping = merge_identifiability_groups(intervals)
        y = np.array([iv.rate_pct_per_h for iv in intervals])
        w = np.array([iv.duration_h for iv in intervals])
        from semo import solve_nnls

        beta = solve_nnls(grouping.design, y, weights=w)
        base = weighted_sse(grouping.design, y, beta, w)
        for j in range(len(beta)):
            for delta in (1e-6, -1e-6):
                tweaked = beta.copy()
                tweaked[j] = max(0.0, tweaked[j] + delta)
                assert weighted_sse(grouping.design, y, tweaked, w) >= base - 1e-12


class TestExactRecovery:
    def test_random_noise_free_scenarios(self):
        rng = np.random.default_rng(5150)
        for _ in range(20):
            scenario, truth = random_exact_scenario(rng)
            result = attribute(simulate(scenario), use_charge_counter="on")
            assert result.baseline_pct_per_h == pytest.approx(truth["baseline"], abs=1e-6)
            for group in result.groups:
                assert len(group.apps) == 1
                assert group.rate_pct_per_h == pytest.approx(truth[group.apps[0]], abs=1e-6)


class TestRateToPower:
    def test_reference_values(self):
        assert rate_to_power(60, 1000, 3700) == pytest.approx(2220.0)
        assert rate_to_power(0, 1234, 5000) == 0.0
        assert rate_to_power(30, 1500, 3700) == pytest.approx(1665.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            rate_to_power(-1, 1000, 3700)
        with pytest.raises(ValueError):
            rate_to_power(10, 0, 3700)
        with pytest.raises(ValueError):
            rate_to_power(10, 1000, 0)


class TestExportCsv:
    def test_records_export(self, tmp_path):
        records = [
            make_record(1000, 80, apps=("a", "b"), charge_uah=5),
            make_record(2000, 79, apps=()),
        ]
        path = tmp_path / "out.csv"
        export_csv(records, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["ts_ms", "level_pct", "voltage_mv", "temp_dc", "charge_uah", "status", "apps"]
        assert len(rows) == 3
        assert rows[1] == ["1000", "80", "3900", "310", "5", "Discharging", "a;b"]
        assert rows[2][4] == ""  # absent charge stays empty

    def test_result_export(self, tmp_path):
        records = [
            make_record(0 * HOUR, 100, apps=()),
            make_record(1 * HOUR, 98, apps=("A",)),
            make_record(2 * HOUR, 93, apps=("B",)),
            make_record(3 * HOUR, 86, apps=()),
        ]
        result = attribute(records)
        path = tmp_path / "result.csv"
        export_csv(result, path, capacity_mah=1000, nominal_voltage_mv=3700)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["group", "rate_pct_per_h", "power_mw", "flags"]
        assert len(rows) == 3  # header + 2 groups
        assert rows[1][0] == "B"  # ranking order
        assert float(rows[1][2]) == pytest.approx(rate_to_power(float(rows[1][1]), 1000, 3700), abs=1e-3)

    def test_result_export_without_constants(self, tmp_path):
        records = [
            make_record(0 * HOUR, 100, apps=("A",)),
            make_record(1 * HOUR, 95, apps=()),
            make_record(2 * HOUR, 93, apps=()),
        ]
        path = tmp_path / "result.csv"
        export_csv(attribute(records), path)
        rows = list(csv.reader(path.open()))
        assert all(row[2] == "" for row in rows[1:])


class TestEnergyAttributor:
    def records(self):
        return [
            make_record(0 * HOUR, 100, apps=()),
            make_record(1 * HOUR, 98, apps=("A",)),
            make_record(2 * HOUR, 93, apps=("B",)),
            make_record(3 * HOUR, 86, apps=("A", "B")),
            make_record(4 * HOUR, 76, apps=()),
        ]

    def test_fit_exposes_result(self):
        est = EnergyAttributor().fit(self.records())
        assert est.baseline_pct_per_h_ == pytest.approx(2.0, abs=1e-9)
        assert isinstance(est.result_, AttributionResult)
        assert est.ranking_[0].apps == ("B",)
        assert est.unobserved_ == ()
        assert est.residual_rms_ == pytest.approx(0.0, abs=1e-9)

    def test_fit_returns_self(self):
        est = EnergyAttributor()
        assert est.fit(self.records()) is est

    def test_predict_on_training_data_reproduces_rates(self):
        records = self.records()
        est = EnergyAttributor().fit(records)
        predicted = est.predict(records)
        observed = [iv.rate_pct_per_h for iv in build_intervals(records)]
        np.testing.assert_allclose(predicted, observed, atol=1e-9)

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            EnergyAttributor().predict(self.records())

    def test_get_set_params_round_trip(self):
        est = EnergyAttributor(use_charge_counter="off", capacity_mah=1200, nominal_voltage_mv=3800)
        params = est.get_params()
        assert params == {
            "use_charge_counter": "off",
            "capacity_mah": 1200,
            "nominal_voltage_mv": 3800,
        }
        est.set_params(use_charge_counter="on")
        assert est.use_charge_counter == "on"
        with pytest.raises(ValueError):
            est.set_params(bogus=1)

    def test_invalid_mode_rejected_at_fit(self):
        with pytest.raises(ValueError):
            EnergyAttributor(use_charge_counter="never").fit(self.records())

    def test_sklearn_clone_compatible(self):
        sklearn_base = pytest.importorskip("sklearn.base")
        est = EnergyAttributor(use_charge_counter="off")
        cloned = sklearn_base.clone(est)
        assert cloned.get_params() == est.get_params()
        assert cloned is not est

    def test_power_estimate_requires_constants(self):
        est = EnergyAttributor()
        with pytest.raises(ValueError):
            est.power_estimate(10.0)
        est.set_params(capacity_mah=1000, nominal_voltage_mv=3700)
        assert est.power_estimate(60.0).power_mw == pytest.approx(2220.0)
