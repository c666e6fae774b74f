"""Service manifests, requests, and the chain fitness function.

A service manifest is the complete description of one offered service:
a set of semantic attribute tokens, an input and an output port type,
price, per-invocation reliability, and usage counters that accumulate
run-time feedback. A request states the attributes a user needs, the
endpoint port types, and a bound on chain length. Fitness scores an
ordered chain of services against a request.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

TOKEN_PATTERN = re.compile(r"[a-z0-9_]+\Z")
MAX_TOKEN_LEN = 64

DEFAULT_BETA = 0.3


class ManifestError(ValueError):
    """Raised for malformed tokens, manifests, requests, or catalog files."""


def parse_token(value: str) -> str:
    """Canonicalize an attribute or port token.

    Tokens are lowercased at parse time; afterwards comparison is exact
    byte equality.
    """
    if not isinstance(value, str):
        raise ManifestError(f"token must be a string, got {type(value).__name__}")
    tok = value.lower()
    if not tok or len(tok) > MAX_TOKEN_LEN or not TOKEN_PATTERN.match(tok):
        raise ManifestError(f"invalid attribute token: {value!r}")
    return tok


def parse_token_set(values) -> frozenset[str]:
    if not isinstance(values, (list, tuple, set, frozenset)):
        raise ManifestError("attribute set must be an array of strings")
    toks = frozenset(parse_token(v) for v in values)
    if not toks:
        raise ManifestError("attribute set must be non-empty")
    return toks


@dataclass
class ServiceManifest:
    """One service: semantic attributes, ports, business terms, feedback counters.

    Everything except the usage counters is immutable by convention; the
    counters are bumped only by deployment feedback inside the single-writer
    epoch loop.
    """

    id: str
    attrs: frozenset[str]
    in_port: str
    out_port: str
    price: float = 0.0
    reliability: float = 1.0
    usage_count: int = 0
    success_count: int = 0

    def success_rate(self) -> float:
        return self.success_count / self.usage_count if self.usage_count > 0 else 0.0

    def copy(self) -> "ServiceManifest":
        return ServiceManifest(
            id=self.id,
            attrs=self.attrs,
            in_port=self.in_port,
            out_port=self.out_port,
            price=self.price,
            reliability=self.reliability,
            usage_count=self.usage_count,
            success_count=self.success_count,
        )


@dataclass(frozen=True)
class Request:
    """A user's semantic need: required attributes, endpoint ports, length bound."""

    id: str
    req_attrs: frozenset[str]
    source_port: str
    sink_port: str
    max_len: int
    budget: float | None = None


def validate_manifest(m: ServiceManifest) -> list[str]:
    """Return all invariant violations of a manifest (empty list means ok)."""
    violations = []
    if not m.id:
        violations.append("empty id")
    if not m.attrs:
        violations.append("empty attribute set")
    if not (0.0 <= m.reliability <= 1.0):
        violations.append("reliability out of range")
    if m.price < 0:
        violations.append("negative price")
    if m.usage_count < 0 or m.success_count < 0:
        violations.append("negative counter")
    if m.success_count > m.usage_count:
        violations.append("success exceeds usage")
    return violations


def validate_request(r: Request) -> list[str]:
    violations = []
    if not r.id:
        violations.append("empty id")
    if not r.req_attrs:
        violations.append("empty required attribute set")
    if r.max_len < 1:
        violations.append("max_len below 1")
    if r.budget is not None and r.budget < 0:
        violations.append("negative budget")
    return violations


class Catalog:
    """Ordered pool of service manifests keyed by id.

    Iteration order is insertion order, which keeps every weighted draw
    over the pool deterministic.
    """

    def __init__(self, services=()):
        self._services: dict[str, ServiceManifest] = {}
        for s in services:
            self.add(s)

    def add(self, service: ServiceManifest) -> None:
        if service.id in self._services:
            raise ManifestError(f"duplicate service id: {service.id!r}")
        bad = validate_manifest(service)
        if bad:
            raise ManifestError(f"invalid manifest {service.id!r}: " + "; ".join(bad))
        self._services[service.id] = service

    def get(self, service_id: str) -> ServiceManifest:
        return self._services[service_id]

    def __contains__(self, service_id: str) -> bool:
        return service_id in self._services

    def __iter__(self):
        return iter(self._services.values())

    def __len__(self) -> int:
        return len(self._services)

    def ids(self) -> list[str]:
        return list(self._services.keys())

    def resolve(self, service_ids) -> list[ServiceManifest]:
        return [self._services[sid] for sid in service_ids]

    def copy(self) -> "Catalog":
        return Catalog(s.copy() for s in self)


# --- Descriptor algebra and fitness ---


def chain_descriptor(chain) -> frozenset[str]:
    """Union of the attribute sets of every chain member."""
    attrs: frozenset[str] = frozenset()
    for s in chain:
        attrs |= s.attrs
    return attrs


def coverage(chain_attrs: frozenset[str], req: Request) -> float:
    """Fraction of the request's attributes present in the chain descriptor."""
    return len(chain_attrs & req.req_attrs) / len(req.req_attrs)


def compat(chain, req: Request) -> float:
    """Fraction of satisfied port junctions along the chain, in {0..k+1}/(k+1).

    A chain of k members has k+1 junctions: request source to first input,
    each member's output to the next member's input, and last output to the
    request sink. An empty chain has compatibility 0.
    """
    chain = list(chain)
    k = len(chain)
    if k == 0:
        return 0.0
    matches = 0
    if req.source_port == chain[0].in_port:
        matches += 1
    for i in range(k - 1):
        if chain[i].out_port == chain[i + 1].in_port:
            matches += 1
    if chain[-1].out_port == req.sink_port:
        matches += 1
    return matches / (k + 1)


def surplus(chain_attrs: frozenset[str], req: Request) -> float:
    """Fraction of the chain descriptor not demanded by the request."""
    if not chain_attrs:
        return 0.0
    return len(chain_attrs - req.req_attrs) / len(chain_attrs)


def fitness(chain, req: Request, beta: float = DEFAULT_BETA) -> float:
    """Score a chain against a request in [0, 1].

    Semantic match (coverage minus beta-weighted surplus, floored at 0) is
    gated multiplicatively by port compatibility, so a structurally broken
    chain scores 0 regardless of how well its attributes match. The score
    is 1 exactly when coverage is full, there is no surplus, and every
    junction is satisfied.
    """
    if not (0.0 <= beta < 1.0):
        raise ValueError("beta must be in [0, 1)")
    chain = list(chain)
    if len(chain) > req.max_len:
        raise ValueError(f"chain length {len(chain)} exceeds max_len {req.max_len}")
    if not chain:
        return 0.0
    attrs = chain_descriptor(chain)
    semantic = coverage(attrs, req) - beta * surplus(attrs, req)
    if semantic < 0.0:
        semantic = 0.0
    return semantic * compat(chain, req)


def chain_price(chain) -> float:
    total = 0.0
    for s in chain:
        total += s.price
    return total


# --- JSON interchange (strict: unknown keys rejected) ---

_SERVICE_KEYS = {"id", "attrs", "in_port", "out_port", "price", "reliability"}
_REQUEST_KEYS = {"id", "req_attrs", "source_port", "sink_port", "max_len", "budget"}


def _require_str(obj, key, where):
    v = obj.get(key)
    if not isinstance(v, str) or not v:
        raise ManifestError(f"{where}: key {key!r} must be a non-empty string")
    return v


def _require_number(obj, key, where):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ManifestError(f"{where}: key {key!r} must be a number")
    return float(v)


def service_from_obj(obj, where: str = "service") -> ServiceManifest:
    """Build a manifest from a parsed JSON object, rejecting unknown keys."""
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object")
    unknown = set(obj) - _SERVICE_KEYS
    if unknown:
        raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
    missing = _SERVICE_KEYS - set(obj)
    if missing:
        raise ManifestError(f"{where}: missing keys {sorted(missing)}")
    m = ServiceManifest(
        id=_require_str(obj, "id", where),
        attrs=parse_token_set(obj["attrs"]),
        in_port=parse_token(obj["in_port"]),
        out_port=parse_token(obj["out_port"]),
        price=_require_number(obj, "price", where),
        reliability=_require_number(obj, "reliability", where),
    )
    bad = validate_manifest(m)
    if bad:
        raise ManifestError(f"{where} {m.id!r}: " + "; ".join(bad))
    return m


def service_to_obj(m: ServiceManifest) -> dict:
    return {
        "id": m.id,
        "attrs": sorted(m.attrs),
        "in_port": m.in_port,
        "out_port": m.out_port,
        "price": m.price,
        "reliability": m.reliability,
    }


def request_from_obj(obj, where: str = "request") -> Request:
    """Build a request from a parsed JSON object, rejecting unknown keys."""
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object")
    unknown = set(obj) - _REQUEST_KEYS
    if unknown:
        raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
    missing = (_REQUEST_KEYS - {"budget"}) - set(obj)
    if missing:
        raise ManifestError(f"{where}: missing keys {sorted(missing)}")
    max_len = obj["max_len"]
    if isinstance(max_len, bool) or not isinstance(max_len, int):
        raise ManifestError(f"{where}: key 'max_len' must be an integer")
    budget = None
    if "budget" in obj:
        budget = _require_number(obj, "budget", where)
    r = Request(
        id=_require_str(obj, "id", where),
        req_attrs=parse_token_set(obj["req_attrs"]),
        source_port=parse_token(obj["source_port"]),
        sink_port=parse_token(obj["sink_port"]),
        max_len=max_len,
        budget=budget,
    )
    bad = validate_request(r)
    if bad:
        raise ManifestError(f"{where} {r.id!r}: " + "; ".join(bad))
    return r


def request_to_obj(r: Request) -> dict:
    obj = {
        "id": r.id,
        "req_attrs": sorted(r.req_attrs),
        "source_port": r.source_port,
        "sink_port": r.sink_port,
        "max_len": r.max_len,
    }
    if r.budget is not None:
        obj["budget"] = r.budget
    return obj


def load_catalog(path) -> Catalog:
    """Load a catalog file: a JSON array of service objects."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ManifestError(f"{path}: catalog file must be a JSON array")
    return Catalog(service_from_obj(obj, f"{path}[{i}]") for i, obj in enumerate(data))


def load_request(path) -> Request:
    """Load a request file: a single JSON request object."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return request_from_obj(data, str(path))
