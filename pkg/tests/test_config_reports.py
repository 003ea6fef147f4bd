import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ell_lab import reports
from ell_lab.config import ConfigError, dump_config, parse_config, parse_value
from ell_lab.proportionality import ProportionalityCertificate, compute_K
from ell_lab.system_model import Coefficients, Exponents


def test_parse_values():
    assert parse_value("3") == 3 and isinstance(parse_value("3"), int)
    assert parse_value("2.5e-3") == 2.5e-3
    assert parse_value("1 2, 4") == [1, 2, 4]
    assert parse_value("true") is True
    assert parse_value("ball") == "ball"
    assert parse_value("0,2:1.5; 1,1:-0.5") == "0,2:1.5; 1,1:-0.5"


def test_parse_config_comments_and_errors():
    cfg = parse_config("# header\nn = 3  # dimension\n\ndomain.kind = ball\n")
    assert cfg == {"n": 3, "domain.kind": "ball"}
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("n = 3\nn = 4\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("n 3\n")
    with pytest.raises(ConfigError):
        parse_config("n =\n")


keys = st.from_regex(r"[a-z][a-z_.]{0,10}", fullmatch=True)
values = st.one_of(st.integers(-10 ** 6, 10 ** 6), st.floats(allow_nan=False, allow_infinity=False),
                   st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=4),
                   st.booleans(), st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True).filter(
                       lambda s: s not in ("true", "false", "inf", "nan")))


@given(st.dictionaries(keys, values, max_size=6))
def test_config_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg


def test_csv_header_matches_schema():
    for kind, cols in reports.CSV_SCHEMAS.items():
        text = reports.csv_text(kind, [])
        assert text == reports.schema_header(kind) + "\n"
        assert text.strip().split(",") == list(cols)


def test_csv_rows_are_repr_exact(tmp_path):
    rows = [(0.1, 1 / 3, -2e-300), (1.0, np.float64(math.pi), np.int64(7))]
    path = tmp_path / "p.csv"
    reports.write_csv(path, "profile", rows)
    header, body = reports.read_csv(path)
    assert header == ["t", "u", "du"]
    assert [float(x) for x in body[0]] == [0.1, 1 / 3, -2e-300]
    assert body[1] == ["1.0", repr(math.pi), "7"]


def test_csv_width_checked():
    with pytest.raises(ValueError):
        reports.csv_text("profile", [(1.0, 2.0)])


def test_payload_plain_json(tmp_path):
    cert = compute_K(Coefficients(3, 1, 1, 1), Exponents(0, 1, 1))
    payload = reports.report_payload("compute-k", True, {"cert": cert, "nan": float("nan"),
                                                         "arr": np.arange(3), "flag": np.bool_(True)}, {"n": 3})
    path = tmp_path / "r.json"
    reports.write_json(path, payload)
    back = json.loads(path.read_text())
    assert back["schema"] == reports.SCHEMA and back["verdict"] == "pass"
    assert back["results"]["nan"] == "nan" and back["results"]["arr"] == [0, 1, 2]
    assert back["results"]["cert"]["K"] == 2.0


def test_certificate_survives_report_round_trip():
    cert = compute_K(Coefficients(2, 1, 1, 1), Exponents(1, 2, 1))
    text = cert.to_json()
    again = ProportionalityCertificate.from_json(text).to_json()
    assert again == text
