import numpy as np
import pytest

from geadvlab.data import synth_dataset
from geadvlab.errors import (AuditError, ConfigError, FormatError,
                             MeasurementError, ShapeError)
from geadvlab.evaluation import (CSV_COLUMNS, EvalReport, apr, attack_success_rate,
                                 audit_budget, evaluate_victims, fps, measure_fps,
                                 read_reports_csv, spr, transfer_eval,
                                 write_reports_csv)
from geadvlab.models import build_classifier, predict_labels
from geadvlab.rng import RngStream
from geadvlab.training import accuracy, train_classifier


@pytest.fixture(scope="module")
def trained():
    ds = synth_dataset(400, 5, (1, 16, 16), seed=3)
    net = build_classifier("classifier_b", (1, 16, 16), 5, seed=0)
    train_classifier(net, ds.images[:300], ds.labels[:300], epochs=6, lr=1e-3,
                     batch_size=50, rng=RngStream(0))
    return net, ds.images[300:], ds.labels[300:]


def test_asr_all_correct_is_zero(trained):
    net, x, y = trained
    preds = predict_labels(net, x)
    keep = preds == y
    asr, n_mis, n_tot = attack_success_rate(net, x[keep], y[keep])
    assert (asr, n_mis) == (0.0, 0)
    assert n_tot == int(keep.sum())


def test_asr_exact_ratio():
    # 909 misleading of 1000 must give exactly 0.909
    assert 909 / 1000 == 0.909
    net = build_classifier("classifier_c", (1, 8, 8), 3, seed=1)
    x = RngStream(4).uniform((10, 1, 8, 8))
    y_pred = predict_labels(net, x)
    y = y_pred.copy()
    y[:4] = (y[:4] + 1) % 3  # force exactly 4 of 10 to mislead
    asr, n_mis, n_tot = attack_success_rate(net, x, y)
    assert (asr, n_mis, n_tot) == (0.4, 4, 10)


def test_asr_identity_attack_complements_accuracy(trained):
    net, x, y = trained
    asr, _, _ = attack_success_rate(net, x, y)
    assert abs(asr - (1.0 - accuracy(net, x, y))) < 1e-15


def test_asr_empty_set(trained):
    net, x, y = trained
    with pytest.raises(ConfigError):
        attack_success_rate(net, x[:0], y[:0])


def test_asr_argmax_invariance(trained):
    # monotone transformation of logits cannot change the report
    net, x, y = trained
    asr1, _, _ = attack_success_rate(net, x, y)
    final_w = list(net.params)[-2]
    final_b = list(net.params)[-1]
    net.params[final_w].data *= 3.0   # strictly monotone per-sample transform
    net.params[final_b].data *= 3.0
    asr2, _, _ = attack_success_rate(net, x, y)
    net.params[final_w].data /= 3.0
    net.params[final_b].data /= 3.0
    assert asr1 == asr2


def test_apr_zero_for_identical():
    x = RngStream(5).uniform((4, 1, 8, 8))
    assert apr(x, x) == 0.0


def test_apr_uniform_shift():
    x = np.full((3, 1, 4, 4), 0.5)
    assert abs(apr(x + 10 / 255, x) - 10.0) < 1e-9


def test_apr_linear_scaling():
    x = np.full((2, 1, 4, 4), 0.5)
    delta = RngStream(6).normal((2, 1, 4, 4), 0.0, 0.05)
    base = apr(x + delta, x)
    for lam in (0.25, 0.5, 0.75):
        assert abs(apr(x + lam * delta, x) - lam * base) < 1e-9


def test_spr_uniform_shift():
    x = np.full((3, 1, 4, 4), 0.5)
    assert abs(spr(x + 10 / 255, x) - 100.0) < 1e-6


def test_spr_quadratic_scaling():
    x = np.full((2, 1, 4, 4), 0.5)
    delta = RngStream(7).normal((2, 1, 4, 4), 0.0, 0.05)
    base = spr(x + delta, x)
    for lam in (0.25, 0.5):
        assert abs(spr(x + lam * delta, x) - lam ** 2 * base) < 1e-9


def test_mean_square_dominates_squared_mean_abs():
    # per-sample Jensen inequality: SPR >= APR^2 for a single sample
    x = np.full((1, 1, 4, 4), 0.5)
    delta = RngStream(8).normal((1, 1, 4, 4), 0.0, 0.03)
    x_adv = np.clip(x + delta, 0, 1)
    assert spr(x_adv, x) >= apr(x_adv, x) ** 2


def test_metric_shape_mismatch():
    with pytest.raises(ShapeError):
        apr(np.zeros((2, 1, 4, 4)), np.zeros((3, 1, 4, 4)))


def test_fps_arithmetic():
    assert fps(500, 2.0) == 250.0


def test_fps_zero_elapsed():
    with pytest.raises(MeasurementError):
        fps(10, 0.0)


def test_audit_passes_within_budget():
    x = np.full((2, 1, 4, 4), 0.5)
    x_adv = x + 16 / 255
    assert audit_budget(x_adv, x, epsilon=16.0) <= 16 / 255 + 1e-9


def test_audit_names_offending_sample():
    x = np.full((3, 1, 4, 4), 0.5)
    x_adv = x.copy()
    x_adv[1, 0, 2, 2] += 20 / 255
    with pytest.raises(AuditError, match="sample 1"):
        audit_budget(x_adv, x, epsilon=16.0)


def test_audit_range_check():
    x = np.full((2, 1, 4, 4), 0.01)
    x_adv = x - 5 / 255  # negative pixels
    with pytest.raises(AuditError):
        audit_budget(x_adv, x, epsilon=16.0)


def test_measure_fps_returns_full_output(trained):
    net, x, y = trained
    out, f, wall = measure_fps(lambda b: b * 0.5 + 0.25, x, batch_size=32)
    assert out.shape == x.shape
    assert np.allclose(out, x * 0.5 + 0.25)
    assert f > 0 and wall > 0


def test_transfer_single_victim_reduces_to_white_box(trained):
    net, x, y = trained
    matrix = transfer_eval(lambda b: np.clip(b + 8 / 255, 0, 1), "classifier_b",
                           [("classifier_b", net)], x, y, epsilon=16.0,
                           method="shift", seed=0)
    direct, _, _ = attack_success_rate(net, np.clip(x + 8 / 255, 0, 1), y)
    assert matrix.reports[0].asr == direct


def test_transfer_zero_perturbation_matches_clean_error(trained):
    net, x, y = trained
    matrix = transfer_eval(lambda b: b, "classifier_b", [("v", net)], x, y,
                           epsilon=16.0)
    assert abs(matrix.reports[0].asr - (1 - accuracy(net, x, y))) < 1e-15
    assert matrix.reports[0].apr == 0.0


def test_transfer_audits_before_evaluating(trained):
    net, x, y = trained
    with pytest.raises(AuditError):
        transfer_eval(lambda b: np.clip(b + 30 / 255, 0, 1), "s", [("v", net)],
                      x, y, epsilon=16.0)


def test_reports_batch_size_invariance(trained):
    net, x, y = trained
    x_adv = np.clip(x + 8 / 255, 0, 1)
    a = evaluate_victims(x, x_adv, y, [("v", net)], source_id="s", method="m",
                         seed=0, epsilon=16.0, fps_value=1.0)
    preds_small = predict_labels(net, x_adv, batch_size=7)
    preds_big = predict_labels(net, x_adv, batch_size=1000)
    assert np.array_equal(preds_small, preds_big)
    assert a.reports[0].n_total == x.shape[0]


def test_csv_round_trip(tmp_path, trained):
    net, x, y = trained
    x_adv = np.clip(x + 4 / 255, 0, 1)
    matrix = evaluate_victims(x, x_adv, y, [("v1", net), ("v2", net)],
                              source_id="s", method="m", seed=3, epsilon=16.0,
                              fps_value=123.456)
    path = str(tmp_path / "matrix.csv")
    write_reports_csv(path, matrix.reports, mean_row=True)
    rows = read_reports_csv(path)
    assert len(rows) == 3
    assert rows[0]["victim"] == "v1" and rows[2]["victim"] == "average"
    assert rows[2]["asr"] == np.mean([r.asr for r in matrix.reports])
    assert tuple(open(path).readline().strip().split(",")) == CSV_COLUMNS


def test_csv_schema_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        read_reports_csv(str(path))


def test_csv_deterministic_bytes(tmp_path):
    r = EvalReport("s", "v", "m", 1, 16.0, 10, 3, 0.3, 1.234567890123,
                   2.5, 99.0)
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    write_reports_csv(p1, [r])
    write_reports_csv(p2, [r])
    assert open(p1, "rb").read() == open(p2, "rb").read()
