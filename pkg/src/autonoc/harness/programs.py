"""Golden agent programs for the four lifecycle tasks.

Operations take explicit domains so the single-agent programs can reuse
them.  Task agents pick their operation from the ``action`` handoff
parameter; planners pick their step template from the ``task`` parameter.
"""

from __future__ import annotations

from autonoc.coi import HandoffParseError, NotAHandoffError, parse_handoff
from autonoc.harness.script import Env, Finish, Program, kv

A, B, DC = "backbone-A", "backbone-B", "intra-dc"
OSNR_MIN_DB = 20.0
RX_POWER_RANGE_DBM = (-20.0, 5.0)
AGENT_A, AGENT_B = "backbone-a-agent", "backbone-b-agent"
ALLOCATOR, HANDLER, RETRIEVER = "resource-allocator", "failure-handler", "knowledge-retriever"


# -- operations ----------------------------------------------------------------


def op_ingest(env: Env, kind: str, payload: str, epoch: str) -> dict:
    return env.call("ingest_demands", kind=kind, payload_gbps=float(payload), epoch=int(epoch))


def op_allocate_apply(env: Env, table: str, verify: bool = True) -> str:
    alloc = env.call("allocate_flows", table=table)
    if env.call("check_capacity", allocation=alloc)["violations"]:
        raise Finish("FAILED allocation violates link capacity")
    env.call("apply_allocation", domain=DC, allocation=alloc)
    if verify:
        topo = env.call("get_topology", domain=DC)
        loads = {link["id"]: link["load_gbps"] for link in topo["links"]}
        if any(abs(loads.get(lid, 0.0) - g) > 1e-9 for lid, g in alloc["loads"].items()):
            raise Finish("FAILED read-back loads differ from the applied allocation")
    max_load = max(alloc["loads"].values(), default=0.0)
    return f"applied=yes flows={len(alloc['flows'])} max_load_gbps={max_load:g}"


def op_assess(env: Env, table: str) -> str:
    r = env.call("assess_local_capacity", table=table)
    return (f"needed={'yes' if r['needed'] else 'no'} aggregate_gbps={r['aggregate_gbps']:g} "
            f"threshold_gbps={r['threshold_gbps']:g}")


def _free(listing: dict) -> list[int]:
    used = {t["channel"] for t in listing["transponders"] if t["channel"] is not None}
    return [c["index"] for c in listing["channels"] if c["index"] not in used]


def op_list_free(env: Env, domain: str) -> list[int]:
    return _free(env.call("list_channels", domain=domain))


def op_select(env: Env, free_a: list[int], domain: str = B) -> tuple[int, str]:
    listing = env.call("list_channels", domain=domain)
    common = sorted(set(free_a) & set(_free(listing)))
    idle = [t["id"] for t in listing["transponders"] if t["channel"] is None]
    if not common or not idle:
        raise Finish("FAILED no channel free at both ends or no idle transponder")
    return common[0], idle[0]


def op_configure(env: Env, domain: str, tid: str, channel: int) -> str:
    r = env.call("configure_transponder", domain=domain, id=tid, channel=channel)
    return f"configured={r['end']} transponder={tid} channel={channel}"


def op_verify(env: Env, channel: int, domain: str = B) -> str:
    q = env.call("get_link_quality", domain=domain, link=f"ch{channel}")
    lo, hi = RX_POWER_RANGE_DBM
    if q["osnr_db"] < OSNR_MIN_DB or not lo <= q["rx_power_dbm"] <= hi:
        raise Finish(f"FAILED ch{channel} osnr_db={q['osnr_db']:.2f} rx_power_dbm={q['rx_power_dbm']:.2f}")
    return f"verified=yes osnr_db={q['osnr_db']:.2f} rx_power_dbm={q['rx_power_dbm']:.2f}"


def op_classify(env: Env, domain: str = DC) -> str:
    alarms = env.call("list_alarms", domain=domain)["alarms"]
    if not alarms:
        raise Finish("FAILED no alarm present")
    label = env.call("classify_failure", domain=domain, anomaly=alarms[0])["label"]
    return f"class={label} first_affected={alarms[0]['first_affected'].replace(' ', ':')}"


def op_localize(env: Env, domain: str) -> str:
    return env.call("localize_failure", domain=domain)["element"]


def op_reroute(env: Env, link: str, verify: bool = True) -> str:
    alloc = env.call("get_topology", domain=DC)["allocation"]
    if alloc is None:
        raise Finish("FAILED no allocation to reroute")
    rr = env.call("reroute_flows", allocation=alloc, avoid=link)
    if rr["unmovable"]:
        raise Finish(f"FAILED {len(rr['unmovable'])} flow(s) cannot avoid {link}")
    new = rr["allocation"]
    if env.call("check_capacity", allocation=new)["violations"]:
        raise Finish("FAILED rerouted allocation violates capacity")
    env.call("apply_allocation", domain=DC, allocation=new)
    if verify:
        back = env.call("get_topology", domain=DC)["allocation"]
        if any(link in f["links"] for f in back["flows"]):
            raise Finish(f"FAILED read-back still uses {link}")
    return f"rerouted={len(rr['moved'])} avoid={link}"


def op_query(env: Env, domain: str) -> str:
    readings = env.call("get_monitors", domain=domain)["readings"]
    alarms = env.call("list_alarms", domain=domain)["alarms"]
    if not alarms:
        return f"domain={domain} monitors={len(readings)} alarms=0"
    ev = alarms[0]["evidence"][0]
    return (f"domain={domain} monitors={len(readings)} alarms={len(alarms)} kind={ev['kind']} "
            f"element={ev['element']} port={ev['port']} delta_db={ev['delta']:.2f}")


def retrieval_query(evidence: dict) -> str:
    return (f"{evidence.get('kind', 'power')} drop first seen at {evidence.get('element', '')} "
            f"{evidence.get('port', '')} monitor in {evidence.get('domain', '')}: span loss localization")


def op_retrieve(env: Env, query: str) -> str:
    hits = env.call("retrieve", query=query, k=3)["hits"]
    if not hits:
        raise Finish("FAILED no document matched")
    docs = ",".join(dict.fromkeys(h["doc_id"] for h in hits))
    return f"top_doc={hits[0]['doc_id']} docs={docs}"


# -- task agents -----------------------------------------------------------------


def _result(env: Env, step: int) -> str:
    return env.need(f"result.{step}")


def _allocator(env: Env) -> str:
    action = env.need("action")
    if action == "ingest":
        r = op_ingest(env, env.need("kind"), env.need("payload_gbps"), env.need("epoch"))
        return f"flows={r['flows']} total_gbps={r['total_gbps']:g}\n{r['table']}"
    if action == "allocate":
        return op_allocate_apply(env, _result(env, 1).split("\n", 1)[1])
    if action == "assess":
        r = op_ingest(env, env.need("kind"), env.need("payload_gbps"), env.need("epoch"))
        return op_assess(env, r["table"])
    if action == "reroute":
        link = kv(_result(env, 2)).get("link")
        if not link:
            raise Finish("FAILED no link to avoid")
        return op_reroute(env, link)
    raise Finish(f"FAILED unknown action {action}")


def _handler(env: Env) -> str:
    action = env.need("action")
    if action == "classify":
        return op_classify(env)
    if action == "localize":
        return f"link={op_localize(env, DC)}"
    raise Finish(f"FAILED unknown action {action}")


def _selected(env: Env) -> tuple[int, str]:
    sel = kv(_result(env, 2))
    if "channel" not in sel or "transponder" not in sel:
        raise Finish("FAILED no channel selection to act on")
    return int(sel["channel"]), sel["transponder"]


def _backbone(domain: str) -> Program:
    def program(env: Env) -> str:
        action = env.need("action")
        if action == "list_free":
            return f"free={','.join(map(str, op_list_free(env, domain)))}"
        if action == "select":
            free = kv(_result(env, 1)).get("free", "")
            channel, tid = op_select(env, [int(c) for c in free.split(",") if c], domain)
            return f"channel={channel} transponder={tid}"
        if action == "configure":
            channel, tid = _selected(env)
            return op_configure(env, domain, tid, channel)
        if action == "verify":
            return op_verify(env, _selected(env)[0], domain)
        if action == "query":
            return op_query(env, domain)
        if action == "localize":
            return f"faulty_span={op_localize(env, domain)}"
        raise Finish(f"FAILED unknown action {action}")
    return program


def _retriever(env: Env) -> str:
    ev = kv(_result(env, 2))
    return op_retrieve(env, retrieval_query(ev))


# -- planners ------------------------------------------------------------------------


def _step(description: str, agent: str, **params) -> dict:
    return {"description": description, "assigned_agent": agent,
            "params": {k: str(v) for k, v in params.items()}}


def plan_steps(task: str, env: Env) -> list[dict]:
    ticket = env.need("ticket")
    if task == "Task1":
        w = {k: env.need(k) for k in ("kind", "payload_gbps", "epoch")}
        return [_step("Ingest this epoch's demand matrix", ALLOCATOR, action="ingest", ticket=ticket, **w),
                _step("Allocate the demands, check capacity, apply through the controller and read back",
                      ALLOCATOR, action="allocate", ticket=ticket)]
    if task == "Task2" and env.view.agent.id == "dci-planner":
        w = {k: env.need(k) for k in ("kind", "payload_gbps", "epoch")}
        return [_step("Assess whether local intra-DC resources suffice for this epoch", ALLOCATOR,
                      action="assess", ticket=ticket, **w),
                _step("Establish a 400G backbone wavelength for the excess demand", "backbone-planner",
                      task="Task2", gbps=400, ticket=ticket)]
    if task == "Task2":
        return [_step("List channels free at the A end", AGENT_A, action="list_free", ticket=ticket),
                _step("Select the lowest channel free at both ends and an idle transponder", AGENT_B,
                      action="select", ticket=ticket),
                _step("Tune the B-end receiver of the selected transponder", AGENT_B, action="configure",
                      ticket=ticket),
                _step("Tune the A-end transmitter of the selected transponder", AGENT_A, action="configure",
                      ticket=ticket),
                _step("Verify OSNR and received power of the new wavelength", AGENT_B, action="verify",
                      ticket=ticket)]
    if task == "Task3":
        return [_step("Detect and classify the intra-DC alarm", HANDLER, action="classify", ticket=ticket),
                _step("Localize the faulty intra-DC link", HANDLER, action="localize", ticket=ticket),
                _step("Reroute traffic away from the faulty link, apply and read back", ALLOCATOR,
                      action="reroute", ticket=ticket)]
    if task == "Task4":
        return [_step("Query backbone-A monitors and alarms", AGENT_A, action="query", ticket=ticket),
                _step("Query backbone-B monitors and alarms", AGENT_B, action="query", ticket=ticket),
                _step("Retrieve troubleshooting guidance for the observed symptom", RETRIEVER,
                      action="retrieve", ticket=ticket),
                _step("Localize the faulty span in backbone-B", AGENT_B, action="localize", ticket=ticket)]
    raise Finish(f"FAILED no plan template for {task}")


def summarize(task: str, results: dict[int, str]) -> str:
    if task == "Task4":
        span = kv(results.get(4)).get("faulty_span")
        if not span:
            raise Finish("FAILED localization result missing")
        doc = kv(results.get(3)).get("top_doc", "none")
        return f"fault localized to {span} in backbone-B; guidance {doc}"
    if task == "Task2" and 2 in results and 5 in results:
        return f"{results[2].splitlines()[0]} {results[5]}"
    last = results[max(results)] if results else "no steps"
    return f"plan complete; last={last.splitlines()[0]}"


def completion_params(block: str) -> dict[str, str]:
    try:
        return dict(parse_handoff(block).params)
    except (NotAHandoffError, HandoffParseError):
        return {}


def _planner(env: Env) -> str:
    task = env.need("task")
    if not env.resumed:
        env.call("create_plan", goal=env.view.handoff.query, steps=plan_steps(task, env))
    results: dict[int, str] = {}
    while True:
        d = env.call("next_action")
        if d["kind"] == "start":
            reply = env.raw("handoff", **d["handoff"])
            if isinstance(reply, dict):  # tool error: the step never ran
                env.call("advance_plan", step_id=d["step_id"], outcome="failed",
                         summary=str(reply.get("error")))
                continue
            results[d["step_id"]] = completion_params(reply).get("result", "")
        elif d["kind"] == "wait":
            env.call("advance_plan", step_id=d["step_id"], outcome="failed", summary="no completion report")
        elif d["kind"] == "finish":
            if not d["complete"]:
                raise Finish(f"FAILED {d['reason']}")
            return summarize(task, results)


PROGRAMS: dict[str, Program] = {
    "dci-planner": _planner,
    "backbone-planner": _planner,
    ALLOCATOR: _allocator,
    HANDLER: _handler,
    AGENT_A: _backbone(A),
    AGENT_B: _backbone(B),
    RETRIEVER: _retriever,
}


# -- single agent ------------------------------------------------------------------


def single_program(variant: str = "golden") -> Program:
    """Whole-task program for the single agent.

    ``variant`` injects one failure: ``omit`` skips the final verification
    (for Task4, the domain-B query), ``flood`` repeats a read without end,
    ``premature`` answers after the first operation.
    """

    def program(env: Env) -> str:
        task = env.need("task")
        if variant == "flood":
            while True:
                env.call("get_topology", domain=B if task in ("Task2", "Task4") else DC)
        if task == "Task1":
            r = op_ingest(env, env.need("kind"), env.need("payload_gbps"), env.need("epoch"))
            if variant == "premature":
                return "demands ingested"
            return op_allocate_apply(env, r["table"], verify=variant != "omit")
        if task == "Task2":
            r = op_ingest(env, env.need("kind"), env.need("payload_gbps"), env.need("epoch"))
            op_assess(env, r["table"])
            if variant == "premature":
                return "backbone capacity requested"
            channel, tid = op_select(env, op_list_free(env, A), B)
            op_configure(env, B, tid, channel)
            op_configure(env, A, tid, channel)
            if variant == "omit":
                return f"channel={channel} transponder={tid}"
            return f"channel={channel} transponder={tid} {op_verify(env, channel, B)}"
        if task == "Task3":
            cls = op_classify(env, DC)
            if variant == "premature":
                return cls
            link = op_localize(env, DC)
            return op_reroute(env, link, verify=variant != "omit")
        if task == "Task4":
            a = op_query(env, A)
            if variant == "premature":
                return a
            if variant == "omit":
                doc = kv(op_retrieve(env, retrieval_query({"kind": "power", "domain": A})))["top_doc"]
                return f"fault localized to {op_localize(env, A)}; guidance {doc}"
            ev = kv(op_query(env, B))
            doc = kv(op_retrieve(env, retrieval_query(ev)))["top_doc"]
            return f"fault localized to {op_localize(env, B)} in backbone-B; guidance {doc}"
        raise Finish(f"FAILED unknown task {task}")

    return program

