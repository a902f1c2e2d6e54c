import pytest

from mammocad.errors import (
    BadTokenCount,
    MissingCoordinates,
    NonNumericCoordinate,
    UnknownCode,
)
from mammocad.mias import (
    MiasRecord,
    format_mias_info,
    group_by_ref,
    gt_to_image_coords,
    load_mias_info,
    parse_mias_info,
)


def test_parse_full_line():
    rec = parse_mias_info("mdb001 G CIRC B 535 425 197")
    assert rec.ref == "mdb001"
    assert rec.tissue == "G"
    assert rec.abnormality == "CIRC"
    assert rec.severity == "B"
    assert rec.center == (535.0, 425.0)
    assert rec.radius == 197.0


def test_parse_norm_line():
    rec = parse_mias_info("mdb003 D NORM")
    assert rec.abnormality == "NORM"
    assert rec.severity is None
    assert rec.center is None
    assert rec.radius is None
    assert not rec.has_lesion


def test_parse_severity_without_location():
    rec = parse_mias_info("mdb059 F MISC B")
    assert rec.severity == "B"
    assert rec.center is None


def test_parse_non_numeric_coordinate():
    with pytest.raises(NonNumericCoordinate):
        parse_mias_info("mdb001 G CIRC B 535 xyz 197")


def test_parse_bad_token_counts():
    with pytest.raises(BadTokenCount):
        parse_mias_info("mdb001 G CIRC B 535 425")
    with pytest.raises(BadTokenCount):
        parse_mias_info("mdb001 G")
    with pytest.raises(BadTokenCount):
        parse_mias_info("mdb003 D NORM B")


def test_parse_unknown_codes():
    with pytest.raises(UnknownCode):
        parse_mias_info("mdb001 Q CIRC B 1 2 3")
    with pytest.raises(UnknownCode):
        parse_mias_info("mdb001 G BLOB B 1 2 3")
    with pytest.raises(UnknownCode):
        parse_mias_info("mdb001 G CIRC X 1 2 3")


def test_record_invariants():
    with pytest.raises(ValueError):
        MiasRecord(ref="x", tissue="F", abnormality="NORM", severity="B")
    with pytest.raises(ValueError):
        MiasRecord(ref="x", tissue="F", abnormality="CIRC", center=(1.0, 2.0), radius=0.0)
    with pytest.raises(ValueError):
        MiasRecord(ref="x", tissue="F", abnormality="CIRC", center=(1.0, 2.0))


def test_coordinate_conversion():
    rec = MiasRecord(ref="x", tissue="F", abnormality="CIRC", severity="M",
                     center=(10.0, 0.0), radius=5.0)
    assert gt_to_image_coords(rec, 1024) == (1023.0, 10.0)
    top = MiasRecord(ref="x", tissue="F", abnormality="CIRC", severity="M",
                     center=(10.0, 1023.0), radius=5.0)
    assert gt_to_image_coords(top, 1024) == (0.0, 10.0)


def test_coordinate_conversion_requires_center():
    rec = MiasRecord(ref="x", tissue="F", abnormality="NORM")
    with pytest.raises(MissingCoordinates):
        gt_to_image_coords(rec, 1024)


def test_load_info_skips_blank_and_comments():
    text = "# header comment\n\nmdb001 G CIRC B 535 425 197\nmdb003 D NORM\n"
    records = load_mias_info(text)
    assert [r.ref for r in records] == ["mdb001", "mdb003"]


def test_format_roundtrip():
    text = "mdb001 G CIRC B 535 425 197\nmdb003 D NORM\n"
    records = load_mias_info(text)
    again = load_mias_info(format_mias_info(records))
    assert again == records


def test_group_by_ref_sorted_and_multi():
    text = "mdb005 F CIRC B 500 168 26\nmdb005 F CIRC B 477 133 30\nmdb003 D NORM\n"
    grouped = group_by_ref(load_mias_info(text))
    assert list(grouped) == ["mdb003", "mdb005"]
    assert len(grouped["mdb005"]) == 2
