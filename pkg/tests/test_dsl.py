from importlib.resources import files

import pytest
from hypothesis import HealthCheck, given, settings

from _strategies import programs
from piprl.dsl import (LexError, ParseError, ValidationError, ast, load_program, parse_source,
                       pretty_print, tokenize, validate)

PROGRAM_DIR = files("piprl") / "data" / "programs"
CORPUS = sorted(p.name for p in PROGRAM_DIR.iterdir() if p.name.endswith(".pirl"))


def source(name):
    return (PROGRAM_DIR / name).read_text(encoding="utf-8")


def kinds(toks):
    return [(t.kind, t.value) for t in toks if t.kind not in ("NEWLINE", "INDENT", "DEDENT")]


def test_tokenize_execute_with_probability():
    assert kinds(tokenize("Execute a_F w/ P(0.33)")) == [
        ("KEYWORD", "Execute"), ("NAME", "a_F"), ("KEYWORD", "w/"), ("KEYWORD", "P"),
        ("OP", "("), ("NUMBER", 0.33), ("OP", ")"),
    ]


def test_tokenize_empty():
    assert tokenize("") == []


def test_lex_error_position():
    with pytest.raises(LexError) as exc:
        tokenize("@@")
    assert (exc.value.span.line, exc.value.span.column) == (1, 1)


def test_multiword_names_merge():
    toks = kinds(tokenize("if SNR > Last SNR:"))
    assert ("NAME", "Last SNR") in toks


def test_angle_literals_both_spellings():
    a = kinds(tokenize("x := 10deg"))
    b = kinds(tokenize("x := 10°"))
    assert a == b


def test_reverse_aoa_structure():
    prog = load_program(source("reverse_aoa.pirl"))
    policies = prog.of_type(ast.PolicyDecl)
    assert len(policies) == 1
    body = policies[0].body
    assert len(body) == 1 and isinstance(body[0], ast.If)
    inner = body[0].then
    assert [type(s) for s in inner] == [ast.Assign, ast.Assign, ast.ExecuteOption]
    assert inner[0].target == ast.Target("intermediate", 1)


def test_meta_program_references():
    prog = load_program(source("meta.pirl"))
    meta = prog.get("meta-program")
    assert prog.meta == "meta-program"
    branch = meta.body[0]
    assert isinstance(branch.then[0], ast.ExecutePolicy) and branch.then[0].policy == "reverse AoA"
    neural = branch.orelse[0]
    assert isinstance(neural, ast.ExecuteNeural)
    assert neural.model == "PPO"
    assert neural.restriction == "SNR prior"
    assert neural.effects == ("Cost Correction", "Link State Prior")


def test_empty_body_is_parse_error():
    with pytest.raises(ParseError, match="empty body"):
        parse_source("Policy p:\n")


def test_unresolved_identifier():
    text = "Policy p:\n    if foo > 1:\n        Execute a_F\n"
    with pytest.raises(ValidationError) as exc:
        load_program(text)
    assert any("unresolved identifier foo" in d.message for d in exc.value.diagnostics)


def test_probabilities_must_sum_to_one():
    text = "Policy p:\n    Execute a_F w/ P(0.5)\n    or Execute a_L w/ P(0.6)\n"
    with pytest.raises(ValidationError) as exc:
        load_program(text)
    assert any("probabilities sum to 1.1" in d.message for d in exc.value.diagnostics)


def test_feature_arity_checked():
    prog = load_program(source("reverse_aoa.pirl"))
    assert prog.get("path estimate").arity == 3


def test_single_factor_prints_one_line():
    prog = ast.Program((ast.FactorDecl("pose", ("x", "y", "phi")),))
    assert pretty_print(prog) == "Factor pose := (x, y, phi)\n"


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_round_trip(name):
    prog = parse_source(source(name))
    assert parse_source(pretty_print(prog)) == prog
    # printing is a fixed point after one pass
    assert pretty_print(parse_source(pretty_print(prog))) == pretty_print(prog)


def test_snr_prior_round_trip_keeps_windows():
    prog = parse_source(source("snr_prior.pirl"))
    again = parse_source(pretty_print(prog))
    assert again.get("SNR prior") == prog.get("SNR prior")


def test_nested_conditionals_keep_depth():
    text = ("Policy p:\n    if x > 1:\n        if x > 2:\n            if x > 3:\n"
            "                Execute a_F\n        else:\n            Execute a_L\n")
    prog = parse_source(text)
    depth = 0
    body = prog.declarations[0].body
    while body and isinstance(body[0], ast.If):
        depth += 1
        body = body[0].then
    assert depth == 3
    assert parse_source(pretty_print(prog)) == prog


@settings(max_examples=1000, deadline=None, suppress_health_check=list(HealthCheck))
@given(programs())
def test_generated_round_trip(prog):
    assert parse_source(pretty_print(prog)) == prog


BROKEN = [
    "Policy p:\n    Execute\n",
    "Feature f := (a,\n",
    "Policy p:\n    if x >:\n        Execute a_F\n",
    "Effect e:\n    Return cost = \n",
    "Policy q:\n    Execute a_F w/ P(0.5)\n    or Execute a_L w/ P(0.5\n",
]


@pytest.mark.parametrize("text", BROKEN)
def test_diagnostic_spans_inside_source(text):
    lines = text.split("\n")
    try:
        load_program(text)
    except (LexError, ParseError) as exc:
        spans = [exc.span]
    except ValidationError as exc:
        spans = [d.span for d in exc.diagnostics]
    else:
        pytest.fail("expected a diagnostic")
    for s in spans:
        assert 1 <= s.line <= len(lines)
        assert 1 <= s.column <= len(lines[s.line - 1]) + 1


def test_pipeline_is_deterministic():
    text = source("meta.pirl")
    assert tokenize(text) == tokenize(text)
    assert validate(parse_source(text)) == validate(parse_source(text))
