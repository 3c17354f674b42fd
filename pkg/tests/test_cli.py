import json
import math

import numpy as np
import pytest

from layerqm.cli import (EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, ResultTable, emit, main,
                         parse_config, read_table, run_job)
from layerqm.errors import ConfigurationError, DomainError
from layerqm.layer_green import Perturbation, xi
from layerqm.magnetic import MagneticConfig
from layerqm.spectrum_single import solve_bound_state

PI = math.pi

MINIMAL = """
mode: bound-states
perturbations:
  - {b: 1.0}
scan: {start: -1, stop: 1, count: 5}
"""


def write(tmp_path, text, name="job.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_document_gets_defaults():
    job = parse_config(MINIMAL)
    assert job.layer.d == PI
    assert job.output_format == "csv"
    assert job.perturbations[0].a == (0.0, 0.0)
    assert job.perturbations[0].alpha == 0.0
    assert list(job.scan.values()) == [-1.0, -0.5, 0.0, 0.5, 1.0]


@pytest.mark.parametrize("text, needle", [
    ("mode: bound-states\nperturbations:\n  - {b: 3.141592653589793}\n"
     "scan: {start: 0, stop: 1, count: 3}\n", "perturbations[0].b"),
    ("mode: wave\nperturbations: [{b: 1}]\n", "mode"),
    ("mode: xi-scan\nperturbations: [{b: 1}]\nscan: {start: 0, stop: 1, count: 1}\n",
     "scan.count"),
    ("mode: xi-scan\nperturbations: [{b: 1}]\nscan: {start: 0, stop: 1, count: 3}\n"
     "output: {format: xml}\n", "output.format"),
    ("mode: xi-scan\nperturbations: []\n", "perturbations"),
    ("mode: xi-scan\nperturbations: [{b: 1}]\n", "scan"),
    ("mode: magnetic-gaps\nperturbations: [{b: 1}]\n", "layer.B"),
    ("mode: xi-scan\nlayer: {d: -1}\nperturbations: [{b: 1}]\n", "layer"),
    ("mode: xi-scan\nbogus: 1\nperturbations: [{b: 1}]\n", "unknown keys"),
    ("mode: xi-scan\nperturbations: [{b: one}]\n", "perturbations[0].b"),
])
def test_invalid_documents_name_the_field(text, needle):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_malformed_yaml_reports_line():
    with pytest.raises(ConfigurationError, match="line 3"):
        parse_config("mode: xi-scan\nperturbations:\n  - {b: [1, 2}\n")


def test_xi_scan_matches_library():
    job = parse_config("mode: xi-scan\nperturbations: [{b: 0.5235987755982988}]\n"
                       "scan: {start: -50, stop: 0.9, count: 40}\n")
    t = run_job(job, timestamp=False)
    z = t.column("z")
    re = t.column("xi_re_1")
    assert re == pytest.approx([xi(PI / 6, v) for v in z], rel=1e-14)
    assert np.all(np.diff(re) > 0)
    assert np.all(t.column("xi_im_1") == 0)


def test_bound_states_ordering_by_distance_from_midplane():
    job = parse_config("""
mode: bound-states
perturbations:
  - {b: 0.5235987755982988}
  - {b: 1.0471975511965976}
  - {b: 1.5707963267948966}
scan: {start: -3, stop: 3, count: 7}
options: {independent: true}
""")
    t = run_job(job, timestamp=False)
    e = np.array([t.column(f"eps_{j}") for j in (1, 2, 3)])
    # the centre closest to the wall binds least
    assert np.all(e[0] >= e[1]) and np.all(e[1] >= e[2])
    a = t.column("alpha")
    assert e[2, 3] == pytest.approx(solve_bound_state(Perturbation(b=PI / 2, alpha=a[3])).eps)


def test_magnetic_gap_trace_reports_empty_interval():
    job = parse_config(f"""
mode: magnetic-gaps
layer: {{B: 1.0}}
perturbations:
  - {{b: {PI / 4}, alpha: 0.0}}
  - {{b: {2 * PI / 3}, alpha: 0.0}}
scan: {{start: 4.01, stop: 4.99, count: 5}}
""")
    assert isinstance(job.layer, MagneticConfig)
    t = run_job(job, timestamp=False)
    assert t.columns == ["z", "m_1", "m_2"]
    assert t.metadata["gap"] == [4.0, 5.0]
    assert len(t.metadata["empty_alpha_intervals"]) >= 1


def test_smatrix_single_and_multi_columns():
    job = parse_config("mode: smatrix\nperturbations: [{b: 1.0, alpha: 0.1}]\n"
                       "scan: {start: 2.5, stop: 5.5, count: 2}\n")
    t = run_job(job, timestamp=False)
    assert t.column("open_channels").tolist() == [1.0, 2.0]
    assert math.isnan(t.rows[0][t.columns.index("S_re_2_2")])
    job = parse_config("mode: smatrix\nperturbations: [{b: 1.0}, {a: [1, 0], b: 2.0}]\n"
                       "scan: {start: 2.5, stop: 2.6, count: 2}\noptions: {quadrature: 64}\n")
    t = run_job(job, timestamp=False)
    assert np.all(t.column("unitarity_defect") < 1e-8)


def test_eigenfunction_grid_marks_centers():
    job = parse_config("mode: eigenfunction-grid\nperturbations: [{b: 1.0, alpha: -0.1}]\n"
                       "scan: {start: 0, stop: 1, count: 3}\noptions: {y_count: 5}\n")
    t = run_job(job, timestamp=False)
    assert len(t.rows) == 15
    y = t.column("y")
    assert np.all(t.column("psi_re")[(y == 0) | (y == PI)] == 0)


def test_emit_csv_and_json_round_trip():
    t = ResultTable(["a", "b"], [[1 / 3, math.nan], [-2.5e-300, math.inf]],
                    {"mode": "xi-scan", "config": {"k": [1, 2]}})
    for fmt in ("csv", "json"):
        if fmt == "json":
            t2 = ResultTable(t.columns, [[1 / 3, math.nan], [-2.5e-300, 7.0]], t.metadata)
        else:
            t2 = t
        back = read_table(emit(t2, fmt), fmt)
        assert back.columns == t2.columns
        assert back.metadata == t2.metadata
        for r1, r2 in zip(back.rows, t2.rows):
            assert all((math.isnan(x) and math.isnan(y)) or x == y for x, y in zip(r1, r2))
    csv_text = emit(t, "csv").decode()
    assert csv_text.splitlines()[0].startswith("# ")
    assert "0.33333333333333331" in csv_text
    with pytest.raises(ConfigurationError):
        emit(t, "xml")


def test_empty_table_is_header_and_metadata():
    t = ResultTable(["z"], [], {"mode": "x"})
    assert emit(t, "csv").decode() == '# mode: "x"\nz\n'
    assert json.loads(emit(t, "json"))["rows"] == []
    with pytest.raises(ValueError):
        ResultTable(["a", "b"], [[1.0]])


def test_main_exit_codes_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["bound-states", "--config", cfg, "--out", str(out1), "--no-timestamp"]) == EXIT_OK
    assert main(["bound-states", "--config", cfg, "--out", str(out2), "--no-timestamp",
                 "--jobs", "2"]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    assert b"timestamp" not in out1.read_bytes()
    assert main(["bound-states", "--config", cfg, "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert "timestamp" in doc["metadata"] and doc["columns"][0] == "alpha"

    assert main(["xi-scan", "--config", cfg]) == EXIT_CONFIG
    assert main(["xi-scan", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = write(tmp_path, "mode: xi-scan\nperturbations: [{b: 9}]\n"
                "scan: {start: 0, stop: 1, count: 2}\n", "bad.yaml")
    assert main(["xi-scan", "--config", bad]) == EXIT_CONFIG
    # xi at a channel threshold is a physics error
    dom = write(tmp_path, "mode: xi-scan\nperturbations: [{b: 1}]\n"
                "scan: {start: 0, stop: 1, count: 2}\n", "dom.yaml")
    assert main(["xi-scan", "--config", dom]) == EXIT_DOMAIN
    assert "xi-scan" in capsys.readouterr().err


def test_run_job_prefixes_domain_errors():
    job = parse_config("mode: eigenfunction-grid\nperturbations: [{b: 1.0}]\n"
                       "options: {eigenvalue: 3}\n")
    with pytest.raises(DomainError, match="eigenfunction-grid"):
        run_job(job)
