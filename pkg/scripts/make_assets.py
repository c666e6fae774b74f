#!/usr/bin/env python3
"""Regenerate the shipped reference configs under src/dbesim/assets/."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
ASSETS = os.path.join(HERE, "..", "src", "dbesim", "assets")


def service(sid, attrs, in_port, out_port, price, reliability):
    return {"id": sid, "attrs": attrs, "in_port": in_port, "out_port": out_port,
            "price": price, "reliability": reliability}


def template(rid, attrs, source, sink, max_len=3, weight=1.0):
    return {"weight": weight,
            "request": {"id": rid, "req_attrs": attrs, "source_port": source,
                        "sink_port": sink, "max_len": max_len}}


def catalog8():
    lab0_catalog = [
        service("s_extract", ["alpha"], "ingest", "parsed", 2.0, 0.99),
        service("s_classify", ["beta"], "parsed", "scored", 3.0, 0.98),
        service("s_report", ["gamma"], "scored", "report", 2.5, 0.99),
        service("s_combo", ["alpha", "beta"], "ingest", "scored", 6.0, 0.97),
        service("s_noise", ["alpha", "delta"], "ingest", "parsed", 1.0, 0.90),
        service("s_bridge", ["beta"], "parsed", "report", 2.0, 0.95),
        service("s_extra", ["epsilon"], "scored", "report", 1.5, 0.90),
        service("s_tail", ["gamma"], "parsed", "report", 2.0, 0.96),
    ]
    return {
        "seed": 42,
        "epochs": 5,
        "scenario": {
            "initial_topology": {"kind": "ring"},
            "habitats": [
                {"id": "lab0", "catalog": lab0_catalog,
                 "profile": [template("ref_request", ["alpha", "beta", "gamma"],
                                      "ingest", "report")]},
                {"id": "lab1",
                 "catalog": [service("t_solo", ["omega"], "ping", "pong", 1.0, 0.99)],
                 "profile": [template("echo", ["omega"], "ping", "pong", 1)]},
            ],
        },
    }


def two_communities():
    habitats = []
    for comm in ("a", "b"):
        for i in range(8):
            j = i - 1 if i >= 1 else 1
            habitats.append({
                "id": f"{comm}{i}",
                "catalog": [
                    service(f"{comm}{i}_s1", [f"p{comm}{i}"], "raw", "mid", 1.0, 0.97),
                    service(f"{comm}{i}_s2", [f"q{comm}{i}"], "mid", "done", 1.0, 0.97),
                ],
                "profile": [
                    template(f"{comm}{i}_local", [f"p{comm}{i}", f"q{comm}{i}"],
                             "raw", "done"),
                    template(f"{comm}{i}_pair", [f"p{comm}{j}", f"q{comm}{i}"],
                             "raw", "done"),
                ],
            })
    return {
        "seed": 42,
        "epochs": 200,
        "evolution": {
            "population_size": 30,
            "generation_budget_per_epoch": 20,
        },
        "ecosystem": {
            "p_mig": 0.2,
            "reinforce_delta": 0.1,
            "decay_lambda": 0.99,
            "w_min": 0.01,
        },
        "scenario": {
            "initial_topology": {"kind": "ring"},
            "habitats": habitats,
        },
    }


def topology_experiment():
    return {
        "seed": 7,
        "epochs": 1,
        "topology": {
            "steps": 20000,
            "m": 2,
            "seed_vertices": 3,
            "eta": {"kind": "uniform", "cap": 0.5},
            "inject": {"eta": 1.0, "at_step": 10000},
        },
        "scenario": {
            "initial_topology": {"kind": "ring"},
            "habitats": [
                {"id": "x0",
                 "catalog": [service("x0_solo", ["omega"], "ping", "pong", 1.0, 0.99)],
                 "profile": [template("x0_echo", ["omega"], "ping", "pong", 1)]},
                {"id": "x1",
                 "catalog": [service("x1_solo", ["omega"], "ping", "pong", 1.0, 0.99)],
                 "profile": [template("x1_echo", ["omega"], "ping", "pong", 1)]},
            ],
        },
    }


def main():
    os.makedirs(ASSETS, exist_ok=True)
    for name, obj in (("catalog8.json", catalog8()),
                      ("two_communities.json", two_communities()),
                      ("topology_experiment.json", topology_experiment())):
        path = os.path.join(ASSETS, name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2)
            f.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
