import pytest

from camscore import fixtures
from camscore.errors import ParameterError, SeriesLookupError, ValidationError
from camscore.trajectory import (
    Alert,
    AlertKind,
    CheckpointRecord,
    ClassCell,
    build_series,
    detect_attribution_collapse,
    detect_class_masking,
    detect_goldlist_collapse,
    epoch_of_checkpoint,
    net_change,
    phase_of,
    run_all_detectors,
)


def record(epoch, auc=0.99, scores=None, global_scores=None, accuracy=0.9):
    """Minimal synthetic checkpoint; scores maps (method, class) -> (cscore, gold)."""
    class_scores = {
        key: ClassCell(cscore=v[0], gold_size=v[1]) for key, v in (scores or {}).items()
    }
    return CheckpointRecord(
        epoch=epoch,
        phase=phase_of(epoch),
        auc=auc,
        accuracy=accuracy,
        class_scores=class_scores,
        global_scores=dict(global_scores or {}),
        checkpoint_id=f"E{epoch}",
    )


class TestPhase:
    def test_default_boundary(self):
        assert phase_of(1) == "TL"
        assert phase_of(20) == "TL"
        assert phase_of(21) == "FT"
        assert phase_of(30) == "FT"

    def test_custom_boundary(self):
        assert phase_of(10, boundary=10) == "TL"
        assert phase_of(11, boundary=10) == "FT"

    def test_bad_epoch(self):
        with pytest.raises(ParameterError):
            phase_of(0)


class TestSeriesConstruction:
    def test_fixture_series_shape(self):
        series = fixtures.series("densenet201")
        assert [r.epoch for r in series] == list(fixtures.CHECKPOINT_EPOCHS)
        assert series[0].phase == "TL" and series[-1].phase == "FT"

    def test_metrics_joined_by_epoch(self):
        series = fixtures.series("densenet201")
        at25 = next(r for r in series if r.epoch == 25)
        assert at25.auc == 0.9867

    def test_global_and_class_scores_split(self):
        series = fixtures.series("resnet50v2")
        last = series[-1]
        assert last.global_scores["scorecam"] == 0.000
        assert last.class_scores[("scorecam", "Pneumonia")].cscore == 0.000
        assert ("scorecam", "global") not in last.class_scores

    def test_missing_metrics_row_rejected(self):
        rows = fixtures.score_rows("densenet201")
        metrics = [m for m in fixtures.metrics_rows("densenet201") if m.epoch != 25]
        with pytest.raises(SeriesLookupError):
            build_series(metrics, rows)

    def test_phase_boundary_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            build_series(
                fixtures.metrics_rows("densenet201"),
                fixtures.score_rows("densenet201"),
                boundary=10,
            )

    def test_duplicate_score_row_rejected(self):
        rows = fixtures.score_rows("densenet201")
        with pytest.raises(ValidationError):
            build_series(fixtures.metrics_rows("densenet201"), rows + [rows[0]])

    def test_gold_size_consistency_enforced(self):
        rec = record(
            5,
            scores={("gradcam", "Normal"): (0.5, 10), ("layercam", "Normal"): (0.5, 11)},
        )
        with pytest.raises(ValidationError):
            rec.gold_size_of("Normal")

    def test_epoch_parsing(self):
        assert epoch_of_checkpoint("E25") == 25
        assert epoch_of_checkpoint("ckpt-007") == 7
        with pytest.raises(ValidationError):
            epoch_of_checkpoint("final")

    def test_duplicate_epochs_rejected(self):
        with pytest.raises(ValidationError):
            detect_goldlist_collapse([record(5), record(5)])

    def test_empty_series_rejected(self):
        with pytest.raises(ParameterError):
            detect_goldlist_collapse([])


class TestNetChange:
    def test_headline_changes(self):
        dense = fixtures.series("densenet201")
        resnet = fixtures.series("resnet50v2")
        assert net_change(dense, "gradcam", 20, 30) == pytest.approx(0.610, abs=1e-12)
        assert net_change(resnet, "scorecam", 20, 30) == pytest.approx(-0.612, abs=1e-12)

    def test_every_recorded_change_matches_cells(self):
        for arch, per_method in fixtures.NET_CHANGE_REFERENCE.items():
            series = fixtures.series(arch)
            for method, want in per_method.items():
                assert net_change(series, method, 20, 30) == pytest.approx(
                    want, abs=1e-12
                ), (arch, method)

    def test_antisymmetry(self):
        series = fixtures.series("inceptionv3")
        fwd = net_change(series, "layercam", 5, 25)
        back = net_change(series, "layercam", 25, 5)
        assert fwd == -back

    def test_same_epoch_is_zero(self):
        series = fixtures.series("densenet201")
        assert net_change(series, "gradcam", 15, 15) == 0.0

    def test_missing_epoch_rejected(self):
        series = fixtures.series("densenet201")
        with pytest.raises(SeriesLookupError):
            net_change(series, "gradcam", 20, 29)

    def test_missing_method_rejected(self):
        series = fixtures.series("densenet201")
        with pytest.raises(SeriesLookupError):
            net_change(series, "sal", 20, 30)


class TestRecordedMeanDiscrepancy:
    """The bundled summary means are kept verbatim from the source tables,
    and they do not equal the mean of the recorded per-method changes (with
    or without the multiscale method). These tests pin that data fact so a
    later "fix" of the constants trips loudly."""

    def test_per_method_values_do_match_cells(self):
        for arch, per_method in fixtures.NET_CHANGE_REFERENCE.items():
            for method, want in per_method.items():
                cells = fixtures.GLOBAL_CSCORE[arch][method]
                assert cells[6] - cells[4] == pytest.approx(want, abs=1e-12)

    def test_recorded_means_do_not_match_any_recomputation(self):
        for arch, recorded in fixtures.MEAN_CHANGE_RECORDED.items():
            per_method = fixtures.NET_CHANGE_REFERENCE[arch]
            five = sum(per_method.values()) / len(per_method)
            cells_ms = fixtures.GLOBAL_CSCORE[arch]["msgradcampp"]
            six = (sum(per_method.values()) + (cells_ms[6] - cells_ms[4])) / 6.0
            assert abs(five - recorded) > 0.01, arch
            assert abs(six - recorded) > 0.01, arch


class TestGoldlistCollapse:
    def test_densenet_fires_once(self):
        alerts = detect_goldlist_collapse(fixtures.series("densenet201"))
        assert [(a.epoch, a.class_label) for a in alerts] == [(25, "Normal")]
        assert alerts[0].kind is AlertKind.GOLD_LIST_COLLAPSE
        assert alerts[0].evidence["auc"] == 0.9867

    def test_resnet_suppressed_by_auc_floor(self):
        # the late empty cell coincides with an AUC crash, so the ranking
        # metric already tells the story and no alert fires
        assert detect_goldlist_collapse(fixtures.series("resnet50v2")) == []

    def test_resnet_fires_without_floor(self):
        alerts = detect_goldlist_collapse(fixtures.series("resnet50v2"), auc_floor=0.0)
        assert [(a.epoch, a.class_label) for a in alerts] == [(30, "Normal")]

    def test_inception_clean(self):
        assert detect_goldlist_collapse(fixtures.series("inceptionv3")) == []

    def test_healthy_synthetic_series_clean(self):
        series = [
            record(e, scores={("gradcam", "Normal"): (0.5, 10)}) for e in (1, 5, 10)
        ]
        assert detect_goldlist_collapse(series) == []


class TestAttributionCollapse:
    def test_resnet_scorecam_fires_once_at_25(self):
        alerts = detect_attribution_collapse(fixtures.series("resnet50v2"), "scorecam")
        assert len(alerts) == 1
        a = alerts[0]
        assert a.epoch == 25
        assert a.method == "scorecam"
        assert a.evidence["prev_epoch"] == 20
        assert a.evidence["prev_score"] == 0.612
        assert a.evidence["score"] == 0.014
        assert a.evidence["auc"] == 0.9902

    def test_resnet_final_crash_suppressed_by_auc(self):
        # score falls to 0.000 at the last checkpoint, but AUC collapses
        # with it, so there is no dissociation to flag
        alerts = detect_attribution_collapse(fixtures.series("resnet50v2"), "scorecam")
        assert all(a.epoch != 30 for a in alerts)

    def test_densenet_never_fires(self):
        series = fixtures.series("densenet201")
        for method in fixtures.METHODS:
            assert detect_attribution_collapse(series, method) == []

    def test_inception_gradcam_survives_ratio_check(self):
        # final drop 0.875 -> 0.244 stays above a quarter of the previous
        # score, so it does not qualify as a collapse
        assert detect_attribution_collapse(fixtures.series("inceptionv3"), "gradcam") == []

    def test_per_class_mode(self):
        alerts = detect_attribution_collapse(
            fixtures.series("resnet50v2"), "gradcam", class_label="Pneumonia"
        )
        assert [(a.epoch, a.class_label) for a in alerts] == [(25, "Pneumonia")]

    def test_per_class_missing_cell_rejected(self):
        with pytest.raises(SeriesLookupError):
            detect_attribution_collapse(
                fixtures.series("resnet50v2"), "gradcam", class_label="Lateral"
            )

    def test_needs_two_checkpoints(self):
        with pytest.raises(ParameterError):
            detect_attribution_collapse([record(1, global_scores={"gradcam": 0.5})], "gradcam")

    def test_boundary_conditions_are_strict(self):
        # exactly drop_ratio * prev and exactly the floor both fail the
        # strict < comparisons
        series = [
            record(1, global_scores={"gradcam": 0.4}),
            record(5, global_scores={"gradcam": 0.1}),
        ]
        assert detect_attribution_collapse(series, "gradcam") == []
        series = [
            record(1, global_scores={"gradcam": 1.0}),
            record(5, global_scores={"gradcam": 0.0999}),
        ]
        alerts = detect_attribution_collapse(series, "gradcam")
        assert [a.epoch for a in alerts] == [5]

    def test_low_auc_suppresses(self):
        series = [
            record(1, global_scores={"gradcam": 0.8}),
            record(5, auc=0.5, global_scores={"gradcam": 0.01}),
        ]
        assert detect_attribution_collapse(series, "gradcam") == []


class TestClassMasking:
    def test_densenet_gradcam_epochs(self):
        alerts = detect_class_masking(fixtures.series("densenet201"), "gradcam")
        assert [a.epoch for a in alerts] == [5, 10, 15, 20]
        at20 = alerts[-1]
        assert at20.evidence["gap"] == pytest.approx(0.650, abs=1e-12)
        assert at20.evidence["high_class"] == "Normal"
        assert at20.evidence["low_class"] == "Pneumonia"

    def test_empty_class_does_not_fake_a_gap(self):
        # at the checkpoint where Normal's gold list is empty only one
        # populated class remains, so no gap is computable
        alerts = detect_class_masking(fixtures.series("densenet201"), "gradcam")
        assert all(a.epoch != 25 for a in alerts)

    def test_resnet_gradcam_fires_at_25(self):
        alerts = detect_class_masking(fixtures.series("resnet50v2"), "gradcam")
        assert [a.epoch for a in alerts] == [25]
        assert alerts[0].evidence["gap"] == pytest.approx(0.798, abs=1e-12)

    def test_resnet_gradcam_near_miss_at_5(self):
        # gap 0.398 sits just under the default 0.40; lowering the
        # threshold exposes it
        alerts = detect_class_masking(fixtures.series("resnet50v2"), "gradcam", gap_min=0.39)
        assert 5 in [a.epoch for a in alerts]

    def test_inception_gradcam_fires_at_30(self):
        alerts = detect_class_masking(fixtures.series("inceptionv3"), "gradcam")
        assert [a.epoch for a in alerts] == [30]

    def test_densenet_other_methods_clean(self):
        series = fixtures.series("densenet201")
        for method in ("gradcampp", "layercam", "scorecam", "eigencam", "msgradcampp"):
            assert detect_class_masking(series, method) == []

    def test_gap_threshold_inclusive(self):
        series = [
            record(
                5,
                scores={
                    ("gradcam", "Normal"): (0.9, 10),
                    ("gradcam", "Pneumonia"): (0.5, 10),
                },
            )
        ]
        alerts = detect_class_masking(series, "gradcam")
        assert len(alerts) == 1
        assert alerts[0].evidence["gap"] == pytest.approx(0.4, abs=1e-12)

    def test_equal_scores_clean(self):
        series = [
            record(
                5,
                scores={
                    ("gradcam", "Normal"): (0.5, 10),
                    ("gradcam", "Pneumonia"): (0.5, 10),
                },
            )
        ]
        assert detect_class_masking(series, "gradcam") == []


class TestRunAll:
    def expected_counts(self):
        return {"densenet201": 5, "inceptionv3": 1, "resnet50v2": 2}

    def test_alert_counts_per_run(self):
        for arch, want in self.expected_counts().items():
            alerts = run_all_detectors(fixtures.series(arch), fixtures.METHODS)
            assert len(alerts) == want, arch

    def test_ordering_and_determinism(self):
        series = fixtures.series("densenet201")
        first = run_all_detectors(series, fixtures.METHODS)
        second = run_all_detectors(series, fixtures.METHODS)
        assert first == second
        keys = [(a.epoch, a.kind.value, a.method or "", a.class_label or "") for a in first]
        assert keys == sorted(keys)

    def test_json_shape(self):
        alerts = run_all_detectors(fixtures.series("resnet50v2"), fixtures.METHODS)
        objs = [a.to_json_obj() for a in alerts]
        for obj in objs:
            assert set(obj) == {"kind", "epoch", "method", "class", "evidence"}
        kinds = {obj["kind"] for obj in objs}
        assert kinds == {"AttributionCollapse", "ClassMasking"}

    def test_alert_requires_evidence(self):
        with pytest.raises(ValidationError):
            Alert(kind=AlertKind.CLASS_MASKING, epoch=5, method="gradcam")
