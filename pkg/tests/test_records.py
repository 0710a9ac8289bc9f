import json

import numpy as np
import pytest

from cvqkd import (
    ChannelModel,
    DiscreteDisplacement,
    EprSource,
    ParseError,
    ProtocolKind,
    SiftingMode,
    TwoComponentMixture,
    UniformNoise,
    read_record,
    run_session,
    write_record,
)
from cvqkd.records import dumps, loads, shape_from_string, shape_to_string


@pytest.fixture(scope="module")
def record():
    return run_session(
        EprSource(9.0), ChannelModel(0.6, 0.25), ProtocolKind.SQUEEZED_HOMODYNE,
        n=5, l=40, sifting_mode=SiftingMode.RANDOM_BASIS, rng_seed=21)


@pytest.mark.parametrize("fmt", ["csv", "json-lines"])
class TestRoundTrip:
    def test_preserves_data(self, record, fmt):
        back = loads(dumps(record, fmt))
        assert np.array_equal(back.a, record.a)
        assert np.array_equal(back.b, record.b)
        assert np.array_equal(back.label_a, record.label_a)
        assert np.array_equal(back.label_b, record.label_b)
        assert np.array_equal(back.kept, record.kept)

    def test_preserves_configuration(self, record, fmt):
        back = loads(dumps(record, fmt))
        assert back.n == record.n and back.l == record.l
        assert back.protocol == record.protocol
        assert back.sifting_mode == record.sifting_mode
        assert back.seed == record.seed
        assert back.source == record.source
        assert back.channel == record.channel

    def test_reserialization_is_byte_identical(self, record, fmt):
        text = dumps(record, fmt)
        assert dumps(loads(text), fmt) == text

    def test_file_round_trip(self, record, fmt, tmp_path):
        path = write_record(record, tmp_path / "rec.dat", fmt)
        back = read_record(path)
        assert np.array_equal(back.a, record.a)


class TestShapeStrings:
    @pytest.mark.parametrize("shape", [
        TwoComponentMixture((0.25, 0.75), (0.4, 1.2)),
        UniformNoise(2.5),
        DiscreteDisplacement(1.25, 0.5),
    ])
    def test_round_trip(self, shape):
        assert shape_from_string(shape_to_string(shape)) == shape

    def test_gaussian(self):
        assert shape_to_string(shape_from_string("gaussian")) == "gaussian"

    def test_unknown_shape(self):
        with pytest.raises(ParseError):
            shape_from_string("pink")

    def test_missing_parameter(self):
        with pytest.raises(ParseError):
            shape_from_string("uniform:width=1.0")


class TestParseErrors:
    def test_not_a_record(self):
        with pytest.raises(ParseError):
            loads("hello world\n1,2,3\n")

    def test_truncated_csv_line(self, record):
        text = dumps(record, "csv")
        lines = text.splitlines()
        lines[3] = "0,0,1.5"
        with pytest.raises(ParseError):
            loads("\n".join(lines))

    def test_bad_float(self, record):
        text = dumps(record, "csv")
        lines = text.splitlines()
        parts = lines[1].split(",")
        parts[2] = "not-a-number"
        lines[1] = ",".join(parts)
        with pytest.raises(ParseError):
            loads("\n".join(lines))

    def test_bad_header_value(self, record):
        text = dumps(record, "csv")
        lines = text.splitlines()
        lines[0] = lines[0].replace("t=0.6", "t=maybe")
        with pytest.raises(ParseError):
            loads("\n".join(lines))

    def test_foreign_json_lines(self):
        with pytest.raises(ParseError):
            loads(json.dumps({"record": "other"}) + "\n")


class TestFormats:
    def test_csv_header_carries_channel(self, record):
        header = dumps(record, "csv").splitlines()[0]
        assert header.startswith("#cvqkd-record")
        for token in ("protocol=squeezed_homodyne", "n=5", "l=40", "seed=21",
                      "t=0.6", "eps=0.25", "shape=gaussian"):
            assert token in header

    def test_json_lines_rows(self, record):
        lines = dumps(record, "json-lines").splitlines()
        header = json.loads(lines[0])
        assert header["record"] == "cvqkd"
        row = json.loads(lines[1])
        assert set(row) == {"block", "pulse", "a", "b", "label_a", "label_b", "kept"}

    def test_unknown_format(self, record):
        with pytest.raises(ParseError):
            dumps(record, "xml")
