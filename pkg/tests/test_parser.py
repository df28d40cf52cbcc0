"""Parser tests for experiment files."""

import io

import pytest

from dopcbf import parse_reader, parse_str
from dopcbf.document import Document, Node, from_plain, lookup, set_path, to_plain
from dopcbf.error import ContractViolation, DuplicateKey, Expected, NotationError
from dopcbf.parser import parse_value_str


def test_parse_prolog_collects_directives():
    """Test parsing prolog directives."""
    input_text = """
$schema: "dopcbf/experiment/1",
$note: 2,

{ seed: 42 }
"""

    doc = parse_str(input_text)
    assert list(doc.prolog) == ["schema", "note"]
    assert doc.directive("schema") == "dopcbf/experiment/1"
    assert doc.directive("note") == 2
    assert doc.directive("missing") is None
    assert to_plain(doc.root) == {"seed": 42}


def test_parse_implicit_top_level_object():
    """Test parsing implicit top-level object."""
    input_text = """
controller: "dopcbf",
observer: { Lr: [3, 3.5] },
acc: { mass_scaled_grade: false, theta_dm: null }
"""

    doc = parse_str(input_text)
    assert doc.root.is_object
    assert to_plain(doc.root) == {
        "controller": "dopcbf",
        "observer": {"Lr": [3, 3.5]},
        "acc": {"mass_scaled_grade": False, "theta_dm": None},
    }
    lr = lookup(doc, "observer.Lr")
    assert lr.is_array
    assert lr.span.line == 3
    assert lookup(doc, "observer.missing") is None


def test_parse_commas_are_optional():
    """Newlines separate entries without commas; trailing commas are allowed."""
    doc = parse_str('road: { kind: "random" rate_bound: 0.01, }\nseed: 3')
    assert to_plain(doc.root) == {"road": {"kind": "random", "rate_bound": 0.01}, "seed": 3}


def test_parse_arrays_without_commas():
    doc = parse_str("road: { knots: [[0 0] [10.0, -0.1],] }")
    assert to_plain(doc.root) == {"road": {"knots": [[0, 0], [10.0, -0.1]]}}


@pytest.mark.parametrize("src", ["acc: { M: 1", "observer: { Lr: [3 3"])
def test_parse_unterminated_containers(src):
    with pytest.raises(NotationError) as exc:
        parse_str(src)
    assert isinstance(exc.value.kind, Expected)


def test_parse_reader():
    doc = parse_reader(io.StringIO("seed: 1"))
    assert to_plain(doc.root) == {"seed": 1}


def test_parse_empty_document():
    doc = parse_str("// nothing here\n")
    assert to_plain(doc.root) == {}
    assert doc.prolog == {}


def test_duplicate_keys_are_rejected():
    with pytest.raises(NotationError) as exc:
        parse_str("seed: 1\nseed: 2")
    assert isinstance(exc.value.kind, DuplicateKey)
    assert exc.value.span.line == 2
    with pytest.raises(NotationError):
        parse_str('$schema: "a"\n$schema: "b"\n')


@pytest.mark.parametrize("src", [
    "acc: { M: }",
    "acc: { M 5 }",
    "[1, 2]",
    "{ seed: 1 } extra",
    "road: { knots: [[0, 0] [1, 0]] x }",
])
def test_parse_errors(src):
    """Syntax errors carry an Expected kind and a span."""
    with pytest.raises(NotationError) as exc:
        parse_str(src)
    assert isinstance(exc.value.kind, Expected)
    assert "line" in str(exc.value)


def test_parse_value_str():
    """Command-line values: bare words are strings, everything else is a value."""
    assert parse_value_str("dopcbf").value == "dopcbf"
    assert parse_value_str("-5").value == -5
    assert parse_value_str("0.5").value == 0.5
    assert parse_value_str("true").value is True
    assert to_plain(parse_value_str("[3, 3]")) == [3, 3]
    with pytest.raises(NotationError):
        parse_value_str("1 2")


def test_set_path_creates_sections():
    doc = Document()
    set_path(doc, "acc.M", Node(value=1500.0))
    set_path(doc, "seed", from_plain(7))
    assert to_plain(doc.root) == {"acc": {"M": 1500.0}, "seed": 7}
    with pytest.raises(ContractViolation):
        set_path(doc, "seed.x", Node(value=1))
    with pytest.raises(ContractViolation):
        set_path(doc, "acc..M", Node(value=1))


def test_from_plain_rejects_objects():
    assert to_plain(from_plain({"knots": ((0.0, 0.0),)})) == {"knots": [[0.0, 0.0]]}
    with pytest.raises(ContractViolation):
        from_plain(object())
