import math

import numpy as np
import pytest

from floodhmt import (
    AlignmentError,
    DataError,
    Grid,
    GridParseError,
    SceneBundle,
    load_scene,
    parse_ascii_grid,
    write_ascii_grid,
    write_grid,
    write_ppm,
)
from floodhmt.raster import DEFAULT_PALETTE, format_number
from helpers import make_grid


class TestParse:
    def test_header_and_values(self):
        text = (
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 2\n"
            "NODATA_value -9999\n3.5 -9999\n"
        )
        g = parse_ascii_grid(text)
        assert g.ncols == 2 and g.nrows == 1
        assert g.cellsize == 2.0
        assert g.nodata == -9999.0
        assert g.values.tolist() == [[3.5, -9999.0]]
        assert g.valid_mask().tolist() == [[True, False]]

    def test_row_major_three_by_two(self):
        text = (
            "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
            "NODATA_value -9999\n1 2 3\n4 5 6\n"
        )
        g = parse_ascii_grid(text)
        assert g.values.ravel().tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        assert g.values[0].tolist() == [1.0, 2.0, 3.0]

    def test_missing_nodata_header_defaults(self):
        text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n7\n"
        assert parse_ascii_grid(text).nodata == -9999.0

    def test_header_keys_case_insensitive(self):
        text = "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nnodata_VALUE -1\n7\n"
        g = parse_ascii_grid(text)
        assert g.nodata == -1.0

    def test_values_may_wrap_lines(self):
        text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n5\n6\n"
        g = parse_ascii_grid(text)
        assert g.values.ravel().tolist() == [1, 2, 3, 4, 5, 6]

    def test_bad_header_names_line(self):
        with pytest.raises(GridParseError, match="line 2: expected 'nrows"):
            parse_ascii_grid("ncols 1\nwrong 1\n")

    def test_bad_header_value_names_line(self):
        with pytest.raises(GridParseError, match="line 5: bad value for cellsize"):
            parse_ascii_grid("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize x\n1\n")

    def test_non_numeric_cell_names_line(self):
        text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 oops\n"
        with pytest.raises(GridParseError, match="line 7: non-numeric value 'oops'"):
            parse_ascii_grid(text)

    def test_too_many_values(self):
        text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n"
        with pytest.raises(GridParseError, match="more than the expected 2"):
            parse_ascii_grid(text)

    def test_too_few_values(self):
        text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n"
        with pytest.raises(GridParseError, match="expected 4 values, found 2"):
            parse_ascii_grid(text)


class TestWrite:
    def test_single_zero_cell(self):
        g = make_grid([[0.0]])
        assert write_ascii_grid(g) == (
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
            "NODATA_value -9999\n0\n"
        )

    def test_integers_have_no_decimal_point(self):
        g = make_grid([[1.0, -3.0, 2.5]])
        assert write_ascii_grid(g).splitlines()[-1] == "1 -3 2.5"

    def test_negative_zero_kept_distinct(self):
        g = make_grid([[-0.0]])
        assert write_ascii_grid(g).splitlines()[-1] == "-0.0"
        back = parse_ascii_grid(write_ascii_grid(g))
        assert math.copysign(1.0, back.values[0, 0]) == -1.0

    def test_parse_write_round_trip_equality(self):
        g = make_grid([[1.5, -9999.0], [0.1 + 0.2, 7.0]], xllcorner=-3.25, yllcorner=100.5)
        assert parse_ascii_grid(write_ascii_grid(g)) == g


def _random_grid(rng):
    nrows = int(rng.integers(1, 9))
    ncols = int(rng.integers(1, 9))
    vals = rng.normal(scale=10.0 ** rng.integers(-3, 4), size=(nrows, ncols))
    vals[rng.random((nrows, ncols)) < 0.2] = -9999.0
    if rng.random() < 0.3:
        vals[rng.random((nrows, ncols)) < 0.2] = np.round(
            rng.normal(scale=50), 0
        )  # integer-valued cells
    return Grid(
        ncols=ncols,
        nrows=nrows,
        xllcorner=float(rng.normal(scale=1e4)),
        yllcorner=float(rng.normal(scale=1e4)),
        cellsize=float(abs(rng.normal(scale=30)) + 0.5),
        nodata=-9999.0,
        values=vals,
    )


def test_write_parse_write_byte_identical_100_random_grids():
    rng = np.random.default_rng(20240901)
    for _ in range(100):
        g = _random_grid(rng)
        first = write_ascii_grid(g)
        assert write_ascii_grid(parse_ascii_grid(first)) == first
        assert parse_ascii_grid(first) == g


def test_read_write_files(tmp_path):
    g = make_grid([[1.25, -9999.0, 3.0]])
    path = tmp_path / "g.asc"
    write_grid(path, g)
    from floodhmt import read_grid

    assert read_grid(path) == g
    with pytest.raises(DataError, match="cannot read"):
        read_grid(tmp_path / "missing.asc")


def test_read_grid_error_names_file(tmp_path):
    path = tmp_path / "bad.asc"
    path.write_text("ncols 1\nnope\n")
    with pytest.raises(GridParseError, match="bad.asc: line 2"):
        from floodhmt import read_grid

        read_grid(path)


class TestSceneBundle:
    def test_aligned_bundle(self):
        dem = make_grid(np.zeros((10, 10)))
        b1 = make_grid(np.ones((10, 10)))
        b2 = make_grid(np.ones((10, 10)))
        scene = SceneBundle(dem=dem, bands=[b1, b2])
        assert scene.valid_count() == 100
        assert scene.features(np.array([0]), np.array([0])).shape == (1, 2)

    def test_geometry_mismatch_names_fields(self):
        dem = make_grid(np.zeros((2, 2)))
        band = make_grid(np.zeros((2, 2)), cellsize=2.0)
        with pytest.raises(AlignmentError, match=r"band\[0\].*cellsize"):
            SceneBundle(dem=dem, bands=[band])

    def test_shape_mismatch(self):
        dem = make_grid(np.zeros((10, 10)))
        band = make_grid(np.zeros((10, 11)))
        with pytest.raises(AlignmentError, match="ncols"):
            SceneBundle(dem=dem, bands=[band])

    def test_all_nodata_labels_legal(self):
        dem = make_grid(np.zeros((3, 3)))
        band = make_grid(np.ones((3, 3)))
        labels = make_grid(np.full((3, 3), -9999.0))
        scene = SceneBundle(dem=dem, bands=[band], labels=labels)
        assert scene.labels.valid_mask().sum() == 0

    def test_label_values_restricted(self):
        dem = make_grid(np.zeros((1, 2)))
        band = make_grid(np.zeros((1, 2)))
        labels = make_grid([[0.0, 2.0]])
        with pytest.raises(DataError, match="labels must be 0, 1, or nodata"):
            SceneBundle(dem=dem, bands=[band], labels=labels)

    def test_validity_intersects_dem_and_bands(self):
        dem = make_grid([[0.0, -9999.0]])
        band = make_grid([[-9999.0, 1.0]])
        scene = SceneBundle(dem=dem, bands=[band])
        assert scene.valid_count() == 0

    def test_needs_a_band(self):
        dem = make_grid([[0.0]])
        with pytest.raises(DataError, match="at least one"):
            SceneBundle(dem=dem, bands=[])


def test_load_scene_names_files(tmp_path):
    dem = make_grid(np.zeros((2, 2)))
    band = make_grid(np.zeros((2, 3)))
    write_grid(tmp_path / "dem.asc", dem)
    write_grid(tmp_path / "b.asc", band)
    with pytest.raises(AlignmentError) as err:
        load_scene(tmp_path / "dem.asc", [tmp_path / "b.asc"])
    assert "dem.asc" in str(err.value) and "b.asc" in str(err.value)
    scene = load_scene(tmp_path / "dem.asc", [tmp_path / "dem.asc"])
    assert scene.valid_count() == 4


class TestPpm:
    def test_two_pixel_map(self):
        g = make_grid([[0.0, 1.0]])
        data = write_ppm(g)
        assert data == b"P6\n2 1\n255\n" + bytes((165, 120, 80, 60, 100, 200))

    def test_all_nodata_black(self):
        g = make_grid(np.full((2, 2), -9999.0))
        data = write_ppm(g)
        assert data == b"P6\n2 2\n255\n" + bytes(12)

    def test_row_major_with_nodata(self):
        g = make_grid([[0.0, 1.0], [1.0, -9999.0]])
        payload = write_ppm(g)[len(b"P6\n2 2\n255\n"):]
        expected = bytes(
            DEFAULT_PALETTE[0] + DEFAULT_PALETTE[1] + DEFAULT_PALETTE[1] + DEFAULT_PALETTE["nodata"]
        )
        assert payload == expected

    def test_palette_override(self):
        g = make_grid([[1.0]])
        data = write_ppm(g, palette={0: (0, 0, 0), 1: (9, 9, 9), "nodata": (1, 1, 1)})
        assert data.endswith(bytes((9, 9, 9)))

    def test_non_class_value_rejected(self):
        g = make_grid([[0.5]])
        with pytest.raises(DataError, match="non-class value"):
            write_ppm(g)

    def test_byte_identical_across_calls(self):
        rng = np.random.default_rng(7)
        vals = rng.integers(0, 2, size=(20, 30)).astype(float)
        vals[rng.random((20, 30)) < 0.1] = -9999.0
        g = make_grid(vals)
        assert write_ppm(g) == write_ppm(g)


class TestFormatNumber:
    def test_cases(self):
        assert format_number(3.0) == "3"
        assert format_number(-9999.0) == "-9999"
        assert format_number(2.5) == "2.5"
        assert format_number(-0.0) == "-0.0"
        assert format_number(0.0) == "0"
        # shortest repr round-trips
        assert float(format_number(0.1 + 0.2)) == 0.1 + 0.2

    def test_nodata_bit_matching(self):
        g = make_grid([[float("nan"), 1.0]], nodata=float("nan"))
        assert g.valid_mask().tolist() == [[False, True]]
