"""Synthetic knowledge graph generator with known duplicates.

Emits an event-style KG plus an exact ground-truth file. Duplicates are
controlled perturbations of originals: character typos, case flips,
dropped fields, numeric jitter, and occasionally a structured address
flattened into a single literal. Fully deterministic for a given seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

SCHEMA_NS = "http://schema.org/"
ENTITY_NS = "http://example.org/entity/"
TYPE_EVENT = SCHEMA_NS + "Event"

_CITIES = [
    "Berlin", "Hamburg", "Munich", "Cologne", "Frankfurt", "Stuttgart", "Leipzig",
    "Dresden", "Innsbruck", "Vienna", "Salzburg", "Graz", "Linz", "Zurich", "Basel",
    "Geneva", "Bremen", "Hannover", "Nuremberg", "Augsburg", "Bonn", "Kassel",
    "Freiburg", "Heidelberg", "Regensburg", "Potsdam", "Erfurt", "Kiel", "Mainz",
    "Trier", "Ulm", "Jena", "Weimar", "Bamberg", "Passau", "Konstanz", "Lindau",
    "Bregenz", "Villach", "Bolzano",
]
_THEMES = [
    "Jazz", "Rock", "Folk", "Opera", "Wine", "Beer", "Film", "Dance", "Art",
    "Craft", "Food", "Harvest", "Lantern", "Spring", "Summer", "Autumn", "Winter",
    "River", "Mountain", "Castle", "Market", "Organ", "Choir", "Puppet", "Science",
    "Book", "Poetry", "Chess", "Kite", "Circus", "Heritage", "Lake", "Forest",
    "Street", "Night", "Harbor", "Garden", "Glass", "Silk", "Amber",
]
_KINDS = [
    "Festival", "Fair", "Days", "Nights", "Week", "Gala", "Parade", "Concert",
    "Symposium", "Exhibition", "Workshop", "Tasting", "Picnic", "Regatta", "Derby",
    "Carnival", "Bazaar", "Retreat", "Showcase", "Jubilee",
]
_WORDS = [
    "annual", "traditional", "celebration", "featuring", "local", "artists",
    "region", "visitors", "family", "friendly", "music", "stage", "open", "air",
    "tickets", "available", "historic", "city", "center", "famous", "international",
    "guests", "culinary", "specialties", "craft", "stalls", "fireworks", "evening",
    "program", "children", "activities", "guided", "tours", "exhibition", "hall",
]
_STREETS = [
    "Hauptstrasse", "Bahnhofstrasse", "Marktplatz", "Ringstrasse", "Gartenweg",
    "Schlossallee", "Uferpromenade", "Kirchgasse", "Lindenallee", "Bergweg",
    "Museumstrasse", "Rathausplatz", "Seestrasse", "Parkallee", "Domgasse",
]


@dataclass
class SynthOptions:
    instances: int = 100
    dup_rate: float = 0.1
    seed: int = 0
    typo_prob: float = 0.15
    case_flip_prob: float = 0.3
    field_drop_prob: float = 0.2
    address_flatten_prob: float = 0.3


def _typo(rng: random.Random, text: str, per_char_prob: float) -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    out = []
    for c in text:
        if rng.random() >= per_char_prob:
            out.append(c)
            continue
        op = rng.choice(("sub", "ins", "del"))
        if op == "sub":
            out.append(rng.choice(alphabet))
        elif op == "ins":
            out.append(c)
            out.append(rng.choice(alphabet))
        # del drops the character
    return "".join(out) or text


def _flip_case(rng: random.Random, text: str) -> str:
    return rng.choice((text.lower(), text.upper(), text.title()))


def _perturb_text(rng: random.Random, text: str, opt: SynthOptions) -> str:
    if rng.random() < opt.case_flip_prob:
        text = _flip_case(rng, text)
    return _typo(rng, text, opt.typo_prob)


def _nt_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


@dataclass
class _Event:
    iri: str
    names: list[str]
    description: str | None
    street: str | None
    postal: str | None
    city: str | None
    flat_address: str | None
    date: str | None
    price: float | None
    free: bool | None

    def triples(self) -> list[str]:
        s = f"<{self.iri}>"
        lines = [f"{s} <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{TYPE_EVENT}> ."]
        for name in self.names:
            lines.append(f'{s} <{SCHEMA_NS}name> "{_nt_escape(name)}" .')
        if self.description:
            lines.append(f'{s} <{SCHEMA_NS}description> "{_nt_escape(self.description)}" .')
        if self.flat_address:
            lines.append(f'{s} <{SCHEMA_NS}address> "{_nt_escape(self.flat_address)}" .')
        elif self.street or self.postal or self.city:
            addr = f"_:addr{self.iri.rsplit('/', 1)[-1]}"
            lines.append(f"{s} <{SCHEMA_NS}address> {addr} .")
            if self.street:
                lines.append(f'{addr} <{SCHEMA_NS}streetAddress> "{_nt_escape(self.street)}" .')
            if self.postal:
                lines.append(f'{addr} <{SCHEMA_NS}postalCode> "{self.postal}" .')
            if self.city:
                lines.append(f'{addr} <{SCHEMA_NS}addressLocality> "{_nt_escape(self.city)}" .')
        if self.date:
            lines.append(
                f'{s} <{SCHEMA_NS}startDate> "{self.date}"'
                f"^^<http://www.w3.org/2001/XMLSchema#date> ."
            )
        if self.price is not None:
            lines.append(
                f'{s} <{SCHEMA_NS}price> "{self.price:.2f}"'
                f"^^<http://www.w3.org/2001/XMLSchema#decimal> ."
            )
        if self.free is not None:
            lines.append(
                f'{s} <{SCHEMA_NS}isAccessibleForFree> "{"true" if self.free else "false"}"'
                f"^^<http://www.w3.org/2001/XMLSchema#boolean> ."
            )
        return lines


def _make_original(rng: random.Random, i: int, name_combo: tuple[str, str, str]) -> _Event:
    city, theme, kind = name_combo
    names = [f"{city} {theme} {kind}"]
    if rng.random() < 0.3:
        names.append(f"{theme} {kind} {rng.randrange(2019, 2026)}")
    description = " ".join(rng.choice(_WORDS) for _ in range(rng.randrange(8, 14)))
    return _Event(
        iri=f"{ENTITY_NS}e{i:05d}",
        names=names,
        description=description,
        street=f"{rng.choice(_STREETS)} {rng.randrange(1, 120)}",
        postal=f"{rng.randrange(10000, 99999)}",
        city=city,
        flat_address=None,
        date=f"2025-{rng.randrange(1, 13):02d}-{rng.randrange(1, 29):02d}",
        price=round(rng.uniform(5, 500), 2),
        free=rng.random() < 0.2,
    )


def _make_duplicate(rng: random.Random, orig: _Event, opt: SynthOptions) -> _Event:
    names = [
        _perturb_text(rng, n, opt)
        for n in orig.names
        if not (len(orig.names) > 1 and rng.random() < opt.field_drop_prob)
    ] or [_perturb_text(rng, orig.names[0], opt)]
    description = (
        None
        if orig.description and rng.random() < opt.field_drop_prob
        else _perturb_text(rng, orig.description, opt)
    )
    street = orig.street if rng.random() >= opt.field_drop_prob else None
    postal = orig.postal if rng.random() >= opt.field_drop_prob else None
    city = orig.city
    flat = None
    if rng.random() < opt.address_flatten_prob:
        parts = [p for p in (city, postal, street) if p]
        flat = _perturb_text(rng, " ".join(parts), opt) if parts else None
        street = postal = city = None
    price = orig.price
    if price is not None:
        if rng.random() < opt.field_drop_prob:
            price = None
        elif rng.random() < 0.2:
            price = round(price * rng.choice((0.95, 1.05)), 2)
    return _Event(
        iri=orig.iri.replace("/e", "/d", 1) if "/e" in orig.iri else orig.iri + "-dup",
        names=names,
        description=description,
        street=street,
        postal=postal,
        city=city,
        flat_address=flat,
        date=orig.date if rng.random() >= opt.field_drop_prob else None,
        price=price,
        free=orig.free,
    )


def generate(opt: SynthOptions) -> tuple[str, list[tuple[str, str]]]:
    """Build (ntriples text, duplicate pairs).

    Instance count includes the duplicates: round(instances * dup_rate)
    of the generated instances are perturbed twins of originals.
    """
    rng = random.Random(opt.seed)
    n_dups = round(opt.instances * opt.dup_rate)
    n_originals = max(1, opt.instances - n_dups)

    combos = [(c, t, k) for c in _CITIES for t in _THEMES for k in _KINDS]
    rng.shuffle(combos)

    originals = [_make_original(rng, i, combos[i]) for i in range(n_originals)]
    dup_sources = rng.sample(range(n_originals), min(n_dups, n_originals))
    dup_sources.sort()

    events = list(originals)
    truth = []
    for i in dup_sources:
        twin = _make_duplicate(rng, originals[i], opt)
        events.append(twin)
        truth.append((originals[i].iri, twin.iri))

    lines = []
    for ev in events:
        lines.extend(ev.triples())
    return "\n".join(lines) + "\n", sorted(truth)


def truth_csv(pairs: list[tuple[str, str]]) -> str:
    rows = ["source_id,target_id,is_duplicate"]
    rows.extend(f"{a},{b},true" for a, b in pairs)
    return "\n".join(rows) + "\n"
