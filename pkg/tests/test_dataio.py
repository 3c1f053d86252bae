import json

import numpy as np
import pytest

from mvcreg import (
    ConcentrationMatrix,
    DataFormatError,
    Dataset,
    fit_all,
    generate,
    plug_in_covariance,
    reference_study_config,
)
from mvcreg.dataio import (
    comparison_to_dict,
    dumps,
    fit_result_to_dict,
    format_fit_table,
    format_report_table,
    parse_csv_text,
    read_csv,
    render_csv,
    report_to_dict,
    weights_to_dict,
    write_csv,
)
from mvcreg.concentrations import build_gramian, compute_weights
from mvcreg.montecarlo import compare_report, run_study
from mvcreg.simgen import with_n_obs, with_seed


def small_sim(n=50, seed=8):
    config, _ = reference_study_config()
    return generate(with_seed(with_n_obs(config, n), seed))


class TestCsv:
    def test_round_trip_bit_exact(self):
        sim = small_sim()
        text = render_csv(sim.data, sim.p)
        data, p = parse_csv_text(text)
        assert data.y.tobytes() == sim.data.y.tobytes()
        assert data.x.tobytes() == sim.data.x.tobytes()
        assert p.values.tobytes() == sim.p.values.tobytes()

    def test_file_round_trip(self, tmp_path):
        sim = small_sim()
        path = tmp_path / "data.csv"
        write_csv(path, sim.data, sim.p)
        data, p = read_csv(path)
        assert data.y.tobytes() == sim.data.y.tobytes()

    def test_header_line(self):
        sim = small_sim()
        first = render_csv(sim.data, sim.p).splitlines()[0]
        assert first == "y,x1,x2,p1,p2"

    def test_rejects_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            read_csv(tmp_path / "absent.csv")

    def test_rejects_bad_header(self):
        with pytest.raises(DataFormatError, match="header"):
            parse_csv_text("a,b,c\n1,2,3\n")

    def test_rejects_out_of_order_columns(self):
        with pytest.raises(DataFormatError):
            parse_csv_text("y,p1,x1\n1.0,1.0,2.0\n")

    def test_reports_bad_cell_line(self):
        text = "y,x1,p1\n1.0,2.0,1.0\n1.0,oops,1.0\n"
        with pytest.raises(DataFormatError, match="line 3"):
            parse_csv_text(text)

    def test_reports_short_row(self):
        text = "y,x1,p1\n1.0,2.0\n"
        with pytest.raises(DataFormatError, match="line 2"):
            parse_csv_text(text)

    def test_rejects_empty(self):
        with pytest.raises(DataFormatError):
            parse_csv_text("")
        with pytest.raises(DataFormatError, match="no data rows"):
            parse_csv_text("y,x1,p1\n")

    def test_rejects_non_stochastic_rows(self):
        text = "y,x1,p1,p2\n1.0,2.0,0.6,0.6\n2.0,1.0,0.5,0.5\n"
        with pytest.raises(DataFormatError):
            parse_csv_text(text)

    def test_row_count_mismatch_on_render(self):
        sim = small_sim()
        p = ConcentrationMatrix(sim.p.values[:-1])
        with pytest.raises(ValueError):
            render_csv(sim.data, p)


class TestJson:
    def test_deterministic_output(self):
        doc = {"b": [1.0, 0.1], "a": np.array([[2.0]]), "n": 3, "flag": True}
        assert dumps(doc) == dumps(doc)

    def test_seventeen_digit_floats(self):
        out = dumps({"x": 0.1})
        assert "0.10000000000000001" in out

    def test_round_trips_through_json(self):
        doc = {"v": [0.1, 1 / 3, 1e-17], "nested": {"w": np.arange(3.0)}}
        parsed = json.loads(dumps(doc))
        assert parsed["v"] == [0.1, 1 / 3, 1e-17]
        assert parsed["nested"]["w"] == [0.0, 1.0, 2.0]

    def test_nan_and_inf_tokens(self):
        parsed = json.loads(dumps({"a": float("nan"), "b": float("inf")}))
        assert np.isnan(parsed["a"]) and np.isinf(parsed["b"])

    def test_rejects_unknown_type(self):
        with pytest.raises(TypeError):
            dumps({"x": object()})


class TestResultDocs:
    def test_fit_result_document(self):
        sim = small_sim(n=400)
        fit = fit_all(sim.data, sim.p)
        covs = tuple(
            plug_in_covariance(sim.data, sim.p, fit, m).v for m in range(2)
        )
        doc = fit_result_to_dict(fit.with_plug_in_cov(covs))
        parsed = json.loads(dumps(doc))
        assert parsed["n_obs"] == 400
        assert len(parsed["coefficients"]) == 2
        assert len(parsed["plug_in_cov"]) == 2
        assert len(parsed["std_errors"][0]) == 2
        assert parsed["errors"] == {}

    def test_weights_document(self):
        sim = small_sim(n=100)
        gramian = build_gramian(sim.p)
        weights = compute_weights(sim.p, gramian)
        doc = weights_to_dict(gramian, weights, sim.p)
        cross = np.array(doc["biorthogonality"])
        np.testing.assert_allclose(cross, np.eye(2), atol=1e-10)

    def test_report_and_comparison_documents(self):
        config, _ = reference_study_config()
        report = run_study(
            with_n_obs(config, 100), rep_count=10, n_grid=(100,)
        )
        doc = report_to_dict(report)
        assert doc["points"][0]["n_obs"] == 100
        cmp_doc = comparison_to_dict(compare_report(report, rel_tol=10.0))
        assert set(cmp_doc) >= {"ok", "worst_cov_rel", "cov_failures"}
        json.loads(dumps(doc))
        json.loads(dumps(cmp_doc))


class TestTables:
    def test_report_table_layout(self):
        config, _ = reference_study_config()
        report = run_study(with_n_obs(config, 120), rep_count=8, n_grid=(60, 120))
        text = format_report_table(report)
        lines = text.splitlines()
        assert lines[0] == "component 1"
        assert "component 2" in lines
        assert sum("inf" in line for line in lines) == 2
        header = next(line for line in lines if "V[1,1]" in line)
        assert "V[2,2]" in header and "V[1,2]" in header

    def test_fit_table_mentions_failures(self):
        rng = np.random.default_rng(0)
        x1 = rng.normal(size=30)
        data = Dataset(y=rng.normal(size=30), x=np.column_stack([x1, x1]))
        t = np.arange(1, 31) / 30
        p = ConcentrationMatrix(np.column_stack([t, 1 - t]))
        fit = fit_all(data, p)
        text = format_fit_table(fit)
        assert "singular-normal-matrix" in text
        assert "nan" in text
