import numpy as np
import pytest

from core.data.pts import PtsAnnotation, parse_pts, select_eyes, write_pts
from core.errors import LandmarkOutOfFrameError, PtsFormatError


def pts_text(n_points = 68, lines = None, version = "1"):
    lines = lines if lines is not None else ["0.0 0.0"] * n_points
    return f"version: {version}\nn_points: {n_points}\n{{\n" + "\n".join(lines) + "\n}\n"


def write(tmp_path, text, name = "face.pts"):
    path = tmp_path / name
    path.write_text(text, encoding = "utf-8")
    return path


class TestParse:
    def test_minimal_file(self, tmp_path):
        annotation = parse_pts(write(tmp_path, pts_text()))
        assert annotation.version == 1 and annotation.n_points == 68
        assert annotation.points == [(0.0, 0.0)] * 68

    def test_header_count_below_lines(self, tmp_path):
        text = pts_text(67, ["0.0 0.0"] * 68)
        with pytest.raises(PtsFormatError, match = "more than n_points") as excinfo:
            parse_pts(write(tmp_path, text))
        assert excinfo.value.lineno == 71

    def test_header_count_above_lines(self, tmp_path):
        with pytest.raises(PtsFormatError) as excinfo:
            parse_pts(write(tmp_path, pts_text(68, ["1 2"] * 67)))
        assert excinfo.value.lineno == 71

    def test_non_numeric_token(self, tmp_path):
        lines = ["1.0 2.0"] * 68
        lines[4] = "1.0 abc"
        with pytest.raises(PtsFormatError, match = "non-numeric") as excinfo:
            parse_pts(write(tmp_path, pts_text(68, lines)))
        assert excinfo.value.lineno == 8

    @pytest.mark.parametrize("text, lineno", [
        ("versoin: 1\nn_points: 1\n{\n0 0\n}\n", 1),
        ("version: 1\nn_points: x\n{\n0 0\n}\n", 2),
        ("version: 1\nn_points: 1\n0 0\n}\n", 3),
        ("version: 1\nn_points: 1\n{\n0 0\n", 5),
        ("version: 1\nn_points: 1\n{\n0 0 0\n}\n", 4),
    ])
    def test_malformed(self, tmp_path, text, lineno):
        with pytest.raises(PtsFormatError) as excinfo:
            parse_pts(write(tmp_path, text))
        assert excinfo.value.lineno == lineno
        assert f":{lineno}:" in str(excinfo.value)

    def test_blank_lines_and_crlf(self, tmp_path):
        text = pts_text(2, ["1.5 2.5", "3 4"]).replace("\n", "\r\n").replace("{\r\n", "{\r\n\r\n")
        assert parse_pts(write(tmp_path, text)).points == [(1.5, 2.5), (3.0, 4.0)]

    def test_six_decimal_round_trip(self, tmp_path, rng):
        points = [tuple(p) for p in np.round(rng.uniform(0, 500, size = (68, 2)), 6).tolist()]
        path = write_pts(PtsAnnotation(points = points), tmp_path / "out" / "a.pts")
        assert parse_pts(path).points == points


class TestSelectEyes:
    def test_index_mapping(self):
        annotation = PtsAnnotation(points = [(float(i), float(i)) for i in range(68)])
        eyes = select_eyes(annotation, 100, 100)
        assert tuple(eyes.points[0]) == (36.0, 36.0)
        assert tuple(eyes.points[11]) == (47.0, 47.0)

    def test_requires_68_points(self):
        with pytest.raises(ValueError):
            select_eyes(PtsAnnotation(n_points = 12, points = [(1.0, 1.0)] * 12), 10, 10)

    def test_out_of_frame(self):
        points = [(5.0, 5.0)] * 68
        points[40] = (12.0, 5.0)
        with pytest.raises(LandmarkOutOfFrameError, match = "4"):
            select_eyes(PtsAnnotation(points = points), 10, 10)
