import json

import pytest

from kunary import figure1_spec, parse_network_file
from kunary.errors import NegativeRate, NonIrreducible, ParseError
from kunary.networkfile import network_to_dict


def figure1_document():
    return json.dumps(network_to_dict(figure1_spec()), indent=2)


def test_figure1_round_trip():
    spec = parse_network_file(figure1_document())
    assert spec.n == 4 and spec.k.tolist() == [3, 3, 2, 1]
    assert (spec.kappa == figure1_spec().kappa).all()


def test_empty_reactions_are_not_irreducible():
    with pytest.raises(NonIrreducible):
        parse_network_file('{"species": ["A"], "k": [1], "reactions": []}')


def test_negative_rate_names_the_field():
    doc = json.loads(figure1_document())
    doc["reactions"][3]["rate"] = -0.5
    with pytest.raises(NegativeRate, match=r"reactions\[3\]\.rate"):
        parse_network_file(json.dumps(doc))


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ParseError, match=r"line 2, column"):
        parse_network_file('{"k": [1],\n "reactions": [,]}')


@pytest.mark.parametrize(
    "doc,where",
    [
        ('{"reactions": []}', "missing field 'k'"),
        ('{"k": [1], "reactions": [{"from": 0, "to": 5, "rate": 1}]}', r"reactions\[0\]\.to"),
        ('{"k": [1], "reactions": [{"from": 0, "to": 1}]}', "missing field 'rate'"),
        ('{"k": [1], "reactions": [{"from": 0, "to": 1, "rate": "x"}]}', r"reactions\[0\]\.rate"),
        ('{"k": [1], "species": ["A", "B"], "reactions": []}', "species"),
    ],
)
def test_field_errors(doc, where):
    with pytest.raises(ParseError, match=where):
        parse_network_file(doc)


def test_rates_are_parsed_as_doubles_bit_exactly():
    doc = '{"k": [1], "reactions": [{"from": 0, "to": 1, "rate": 0.1}, {"from": 1, "to": 0, "rate": 3e-7}]}'
    spec = parse_network_file(doc)
    assert spec.kappa[0, 1] == 0.1 and spec.kappa[1, 0] == 3e-7
