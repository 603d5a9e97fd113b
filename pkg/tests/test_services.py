from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_conveyor_plant
from twincell.errors import (
    ArityMismatch,
    CommandSyntaxError,
    DomainViolation,
    DuplicateService,
    UnknownService,
)
from twincell.plant import spawn_workpiece
from twincell.services import (
    ExecutionContext,
    OPERATOR_SERVICES,
    Param,
    ServiceDescriptor,
    call_line,
    default_registry,
    execute,
    format_invocation,
    parse_command,
    validate,
)

# Every canonical service plus every alias spelling, with in-domain sample
# args. All must round-trip through parse -> validate -> format.
ROUND_TRIP_COMMANDS = [
    ("conveyor_belt_run(forward, 10)", "conveyor_belt_run(forward, 10)"),
    ("conveyor_belt_run(backward, 3600)", "conveyor_belt_run(backward, 3600)"),
    ("conveyor_belt_stop()", "conveyor_belt_stop()"),
    ("activate_material_holder()", "activate_material_holder()"),
    ("deactivate_material_holder()", "deactivate_material_holder()"),
    ("communicate_with_agent(op_processing)", "communicate_with_agent(op_processing)"),
    ("communicate_with_next_agent()", "communicate_with_next_agent()"),
    ("release_workpiece_to_next_agent()", "release_ready_workpiece_to_next_agent()"),
    ("wait(5)", "wait(5)"),
    ("send_alert_to_human_supervisor(belt jam)",
     "send_alert_to_human_supervisor(belt jam)"),
    ("send_alert_to_human_supervisor()", "send_alert_to_human_supervisor()"),
    ("pass()", "pass()"),
    ("rfid_read()", "rfid_read()"),
    # procedure-text alias spellings
    ("activate_conveyor(forward, 10)", "conveyor_belt_run(forward, 10)"),
    ("release_workpiece()", "release_ready_workpiece_to_next_agent()"),
    ("ask_next_operator()", "communicate_with_next_agent()"),
    # whitespace and quote tolerance
    ("  wait( 5 ) ", "wait(5)"),
    ('conveyor_belt_run("forward", 10)', "conveyor_belt_run(forward, 10)"),
    ("agv_move_to(processing1)", "agv_move_to(processing1)"),
    ("move_to(processing1)", "agv_move_to(processing1)"),
]

MALFORMED_SYNTAX = [
    "conveyor_belt_run(forward, 10",      # unbalanced
    "wait(5))",                           # trailing garbage
    "wait 5",                             # no parens
    "(5)",                                # empty name
    "wait(",                              # unterminated
    "wait)",                              # no open paren
    "",                                   # empty text
    "   ",                                # whitespace only
    "wait(5) extra",                      # trailing text
    "wa it(5)",                           # space in name
    "9wait(5)",                           # bad name start
    "wait((5)",                           # nested paren
    "wait(5,)",                           # empty argument
    'wait("5)',                           # unterminated quote
]

UNKNOWN_SERVICES = [
    "teleport_workpiece()",
    "self_destruct(1)",
    "conveyor_belt_reverse(10)",
]

DOMAIN_VIOLATIONS = [
    "conveyor_belt_run(sideways, 10)",    # enum violation
    "conveyor_belt_run(forward, fast)",   # non-integer
    "conveyor_belt_run(forward, 0)",      # below range
    "conveyor_belt_run(forward, 4000)",   # above range
    "wait(-1)",
]

ARITY_VIOLATIONS = [
    "conveyor_belt_run(forward)",
    "conveyor_belt_run(forward, 10, 3)",
    "wait()",
    "pass(1)",
]


class TestParse:
    def test_simple(self):
        assert parse_command("wait(5)") == ("wait", ["5"])

    def test_nullary(self):
        assert parse_command("pass()") == ("pass", [])

    def test_two_args_with_spaces(self):
        assert parse_command("conveyor_belt_run( forward , 10 )") == (
            "conveyor_belt_run", ["forward", "10"])

    def test_quoted_string_with_comma(self):
        name, args = parse_command('send_alert_to_human_supervisor("stuck, jammed")')
        assert args == ["stuck, jammed"]

    @pytest.mark.parametrize("text", MALFORMED_SYNTAX)
    def test_malformed_rejected(self, text):
        with pytest.raises(CommandSyntaxError):
            parse_command(text)


class TestValidate:
    @pytest.mark.parametrize("text,canonical", ROUND_TRIP_COMMANDS)
    def test_round_trip(self, registry, text, canonical):
        name, args = parse_command(text)
        invocation = validate(registry, name, args)
        assert format_invocation(invocation) == canonical
        # formatting and re-validating reproduces the invocation exactly
        name2, args2 = parse_command(format_invocation(invocation))
        again = validate(registry, name2, args2)
        assert again.service == invocation.service
        assert again.args == invocation.args

    @pytest.mark.parametrize("text", UNKNOWN_SERVICES)
    def test_unknown_service(self, registry, text):
        name, args = parse_command(text)
        with pytest.raises(UnknownService):
            validate(registry, name, args)

    @pytest.mark.parametrize("text", DOMAIN_VIOLATIONS)
    def test_domain_violation(self, registry, text):
        name, args = parse_command(text)
        with pytest.raises(DomainViolation):
            validate(registry, name, args)

    @pytest.mark.parametrize("text", ARITY_VIOLATIONS)
    def test_arity_mismatch(self, registry, text):
        name, args = parse_command(text)
        with pytest.raises(ArityMismatch):
            validate(registry, name, args)

    def test_alias_resolution_idempotent(self, registry):
        name, args = parse_command("activate_conveyor(forward, 10)")
        first = validate(registry, name, args)
        name2, args2 = parse_command(format_invocation(first))
        second = validate(registry, name2, args2)
        assert format_invocation(second) == format_invocation(first)


class TestRegistry:
    def test_duplicate_rejected(self, registry):
        with pytest.raises(DuplicateService):
            registry.register(ServiceDescriptor("wait", "again"))

    def test_alias_to_unknown_rejected(self, registry):
        with pytest.raises(UnknownService):
            registry.register_alias("zap", "no_such_service")

    def test_empty_enum_domain_rejected(self, registry):
        with pytest.raises(ValueError):
            registry.register(ServiceDescriptor(
                "broken", "x", [Param("mode", "enum", ())]))

    def test_render_catalog_order_and_shape(self, registry):
        text = registry.render_catalog(OPERATOR_SERVICES)
        lines = text.splitlines()
        assert len(lines) == len(OPERATOR_SERVICES)
        assert lines[0].startswith(
            "`conveyor_belt_run(direction, duration_in_second)`: Moves the conveyor belt")
        assert lines[-1].startswith("`rfid_read()`:")

    def test_render_catalog_empty(self, registry):
        assert registry.render_catalog([]) == ""

    def test_render_catalog_subset(self, registry):
        assert registry.render_catalog(["pass"]).count("\n") == 0

    def test_render_catalog_unknown(self, registry):
        with pytest.raises(UnknownService):
            registry.render_catalog(["nope"])

    def test_registry_loads_from_definition_file(self, tmp_path):
        import yaml
        from twincell.services import load_registry_file
        path = tmp_path / "registry.yaml"
        path.write_text(yaml.safe_dump({
            "services": [
                {"name": "blink_light", "description": "Blinks the light.",
                 "params": [{"name": "times", "kind": "integer",
                             "domain": [1, 10]}]}],
            "aliases": {"flash": "blink_light"},
        }))
        registry = load_registry_file(str(path))
        invocation = validate(registry, "flash", ["3"])
        assert invocation.service == "blink_light"
        assert invocation.args == [3]

    def test_shipped_registry_covers_catalog_services(self, registry):
        for name in OPERATOR_SERVICES:
            assert name in registry.services
        assert registry.aliases["ask_next_operator"] == "communicate_with_next_agent"


def _ctx(now=0):
    return ExecutionContext(issued_by="op_conveyor", station_id="conveyor1",
                            next_agent="op_next", now=now, tags=["conveyor1"])


def _validated(registry, text, at=0):
    name, args = parse_command(text)
    return validate(registry, name, args, issued_by="op_conveyor", at=at)


class TestExecute:
    def test_conveyor_run_sets_state_and_timer(self, registry):
        plant = make_conveyor_plant()
        result = execute(registry, _validated(registry, "conveyor_belt_run(forward, 10)"),
                         plant, _ctx())
        assert result.status == "ok"
        assert plant.stations["conveyor1"].belt_state == "forward"
        assert plant.stations["conveyor1"].belt_timer_ms == 10_000

    def test_pass_changes_nothing(self, registry):
        plant = make_conveyor_plant()
        before = plant.copy()
        result = execute(registry, _validated(registry, "pass()"), plant, _ctx())
        assert result.status == "ok"
        assert result.events == [] and result.signal_changes == []
        assert plant == before

    def test_wait_defers_via_hold_until(self, registry):
        result = execute(registry, _validated(registry, "wait(5)", at=21_000),
                         make_conveyor_plant(), _ctx(now=21_000))
        assert result.hold_until == 26_000

    def test_holder_with_ready_piece(self, registry):
        plant = make_conveyor_plant()
        spawn_workpiece(plant, "conveyor1", "W1", offset=0.97)
        result = execute(registry, _validated(registry, "activate_material_holder()"),
                         plant, _ctx())
        assert result.status == "ok"
        assert plant.workpieces["W1"].held is True

    def test_holder_on_empty_window_is_failed_not_fatal(self, registry):
        plant = make_conveyor_plant()
        before = plant.copy()
        result = execute(registry, _validated(registry, "activate_material_holder()"),
                         plant, _ctx())
        assert result.status == "failed"
        assert plant == before

    def test_communicate_emits_and_queues_status(self, registry):
        result = execute(registry, _validated(registry, "ask_next_operator()", at=100),
                         make_conveyor_plant(), _ctx(now=100))
        assert [e.text for e in result.events] == [
            "Communication initiated with the next operator to determine the "
            "subsequent action."]
        assert result.status_queries == [(1000, "op_next")]

    def test_alert_flagged_and_plant_untouched(self, registry):
        plant = make_conveyor_plant()
        before = plant.copy()
        result = execute(
            registry,
            _validated(registry, "send_alert_to_human_supervisor(workpiece stuck)"),
            plant, _ctx())
        assert result.alert is True
        assert "workpiece stuck" in result.events[0].text
        assert "alert" in result.events[0].tags
        assert plant == before

    def test_release_transfers_ownership(self, registry):
        plant = make_conveyor_plant()
        spawn_workpiece(plant, "conveyor1", "W1", offset=0.97)
        execute(registry, _validated(registry, "activate_material_holder()"),
                plant, _ctx())
        result = execute(
            registry,
            _validated(registry, "release_ready_workpiece_to_next_agent()"),
            plant, _ctx())
        assert result.status == "ok"
        assert plant.workpieces["W1"].buffer == "handover:op_next"
        assert any(e.text == "Workpiece control transferred to the next agent."
                   for e in result.events)

    def test_call_line_uses_canonical_form(self, registry):
        invocation = _validated(registry, "activate_conveyor(forward, 10)")
        assert call_line(invocation) == (
            "Operator agent calls the operation 'conveyor_belt_run(forward, 10)'.")


@settings(max_examples=80, deadline=None)
@given(direction=st.sampled_from(["forward", "backward"]),
       duration=st.integers(1, 3600),
       issue=st.text(alphabet=st.characters(
           codec="ascii", categories=("L", "N", "P", "Zs")), max_size=40))
def test_format_parse_round_trip_property(direction, duration, issue):
    registry = default_registry()
    for text in (f"conveyor_belt_run({direction}, {duration})",
                 f"wait({duration})"):
        name, args = parse_command(text)
        invocation = validate(registry, name, args)
        name2, args2 = parse_command(format_invocation(invocation))
        assert validate(registry, name2, args2).args == invocation.args
    # string argument round-trip, with quoting where needed
    from twincell.services import Invocation
    invocation = Invocation("send_alert_to_human_supervisor", [issue])
    name, args = parse_command(format_invocation(invocation))
    rebuilt = validate(registry, name, args)
    assert rebuilt.args == ([issue] if issue else [issue])
