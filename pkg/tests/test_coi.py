import pytest
from hypothesis import given, settings, strategies as st

import suites
from autonoc.agents.messages import Message
from autonoc.coi import (
    Handoff,
    declaration,
    encode_handoff,
    make_handoff_tool_result,
    parse_handoff,
    parse_pseudo_system,
    pseudo_system_sender,
    validate_declaration,
)
from autonoc.errors import EncodingError, HandoffParseError, NotAHandoffError, RoutingError
from autonoc.harness.roster import multi_agents

AGENTS = {a.id: a for a in multi_agents()}
ids = st.from_regex(r"[A-Za-z0-9_.\-]{1,12}", fullmatch=True)
text = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())


@settings(max_examples=1000, deadline=None)
@given(to=ids, greeting=text, query=text, params=st.dictionaries(ids, st.text(max_size=20), max_size=5))
def test_encode_parse_round_trip(to, greeting, query, params):
    h = Handoff(to, greeting, query, params)
    assert parse_handoff(encode_handoff(h)) == h


def test_suite_round_trips_through_tool_results():
    out = suites.coi_round_trips(200, seed=7)
    assert out["failures"] == []


def test_block_is_found_inside_prose():
    h = Handoff("backbone-b-agent", "Hello Backbone-B Controller Agent", "check EDFA-4", {"span": "span3"})
    prose = f"Sure, delegating now.\n{encode_handoff(h)}\nThanks!"
    assert parse_handoff(prose) == h


def test_three_param_layout():
    h = Handoff("resource-allocator", "Hi Resource-Allocator", "allocate", {"src": "G0", "gbps": "400", "dst": "G1"})
    lines = encode_handoff(h).split("\n")
    assert len(lines) == 8
    assert lines[0] == "@handoff to=resource-allocator" and lines[-1] == "@end"
    assert lines[4:7] == ["  dst=G1", "  gbps=400", "  src=G0"]


def test_empty_params_block():
    h = Handoff("failure-handler", "Hi", "look", {})
    assert encode_handoff(h).split("\n")[-2:] == ["params:", "@end"]
    assert parse_handoff(encode_handoff(h)) == h


def test_missing_query_line_reports_line():
    block = "intro\n@handoff to=x\ngreeting: hi\nparams:\n@end"
    with pytest.raises(HandoffParseError) as exc:
        parse_handoff(block)
    assert exc.value.line == 4  # 1-based over the whole text: the slot where query: belongs


def test_no_block():
    with pytest.raises(NotAHandoffError):
        parse_handoff("just talking")


@pytest.mark.parametrize("h,field", [
    (Handoff("bad id", "hi", "q"), "to"),
    (Handoff("x", "  ", "q"), "greeting"),
    (Handoff("x", "hi", ""), "query"),
    (Handoff("x", "hi", "q", {"bad key": "v"}), "params.bad key"),
])
def test_encoding_errors_name_field(h, field):
    with pytest.raises(EncodingError) as exc:
        encode_handoff(h)
    assert exc.value.field == field


def test_greeting_must_name_target():
    target = AGENTS["backbone-b-agent"]
    h = Handoff(target.id, "Hello there", "check monitors")
    with pytest.raises(EncodingError) as exc:
        make_handoff_tool_result(h, target, sender="Backbone Planner")
    assert exc.value.field == "greeting"


def test_tool_result_carries_pseudo_system_header():
    target = AGENTS["backbone-b-agent"]
    h = Handoff(target.id, f"Hello {target.identity_name}", "check monitors", {"span": "span3"})
    msg = make_handoff_tool_result(h, target, sender="Backbone Planner", tool_call_id="a.1.0")
    assert msg.role == "tool" and msg.tool_call_id == "a.1.0"
    header = parse_pseudo_system(msg.content)
    assert header.target_identity == target.identity_name
    assert header.core_responsibility == target.core_responsibility
    assert pseudo_system_sender(msg.content) == "Backbone Planner"
    assert parse_handoff(msg.content) == h


def test_misrouted_handoff():
    h = Handoff("backbone-a-agent", "Hello Backbone-B Controller Agent", "q")
    with pytest.raises(RoutingError):
        make_handoff_tool_result(h, AGENTS["backbone-b-agent"], sender="Backbone Planner")


def test_declaration_validator_mutations():
    reasons = suites.coi_mutations()
    assert reasons["valid"] == ()
    for name in ("missing declaration", "identity mismatch", "missing acknowledgement"):
        assert reasons[name] == (name,)


def test_sender_mismatch_and_message_input():
    expected = {"identity": "Failure-Handler", "sender": "DCI Planner"}
    assert validate_declaration(declaration("Failure-Handler", "Backbone Planner"), expected).reasons == (
        "sender mismatch",)
    assert validate_declaration(Message("assistant", declaration("Failure-Handler", "DCI Planner")), expected).passed
    assert not validate_declaration(Message("assistant", None), expected).passed


@given(identity=st.sampled_from([a.identity_name for a in multi_agents()]),
       sender=st.sampled_from([a.identity_name for a in multi_agents()]), plan=st.text(max_size=30))
def test_generated_declarations_validate(identity, sender, plan):
    assert validate_declaration(declaration(identity, sender, plan), {"identity": identity, "sender": sender}).passed
