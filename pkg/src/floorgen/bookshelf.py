"""Extended Bookshelf (.blocks / .nets / .pl) and dataset-container I/O.

The writer emits canonical, byte-stable text: ids ascending, floats in
shortest round-trip form.  The parser reports syntax errors with line
numbers and semantic errors (unknown names, off-perimeter terminals) by
name.
"""
from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .geometry import FixedOutline, Partition, RectilinearPolygon, Terminal
from .layout import ConstraintSet, LayoutInstance, Net, Provenance

DATA_MAGIC = "FLOORSET-DATA"
DATA_VERSION = "v1"
DATA_SCHEMA = "floorset-data v1"


class BookshelfError(ValueError):
    pass


class BookshelfSyntaxError(BookshelfError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class BookshelfSemanticError(BookshelfError):
    pass


class DatasetError(ValueError):
    pass


def _num(v: float) -> str:
    """Shortest exact decimal: integers without a trailing .0."""
    f = float(v)
    if f.is_integer():
        return str(int(f))
    return repr(f)


@dataclass(frozen=True)
class BookshelfFiles:
    blocks: str
    nets: str
    pl: str


def write_bookshelf(layout: LayoutInstance) -> BookshelfFiles:
    """Serialize one layout; hard rectilinear blocks carry realized absolute
    vertices, rectangle-mode layouts are written as soft blocks with a
    placement section in the .pl file."""
    soft_mode = layout.provenance.mode == "Lite"
    parts = sorted(layout.partitions, key=lambda p: p.id)
    terms = sorted(layout.terminals, key=lambda t: t.id)
    cs = layout.constraints

    out = io.StringIO()
    out.write("FloorSet blocks 1.0\n")
    pv = layout.provenance
    out.write(f"# provenance : seed={pv.seed} index={pv.index} mode={pv.mode}\n\n")
    out.write(f"Outline : {layout.outline.width} {layout.outline.height}\n")
    out.write(f"NumHardRectilinearBlocks : {0 if soft_mode else len(parts)}\n")
    out.write(f"NumSoftRectangularBlocks : {len(parts) if soft_mode else 0}\n")
    out.write(f"NumTerminals : {len(terms)}\n\n")
    for p in parts:
        if soft_mode:
            lo, hi = cs.shape_range[p.id]
            out.write(f"{p.name} softrectangular {p.area} {_num(lo)} {_num(hi)}\n")
        else:
            vs = " ".join(f"({x},{y})" for x, y in p.shape.vertices)
            out.write(f"{p.name} hardrectilinear {len(p.shape.vertices)} {vs}\n")
    wrote_any = False
    if not soft_mode:
        for pid in sorted(cs.shape_range):
            lo, hi = cs.shape_range[pid]
            name = layout.partition_by_id(pid).name
            if not wrote_any:
                out.write("\n")
                wrote_any = True
            out.write(f"CONSTRAINT shaperange {name} {_num(lo)} {_num(hi)}\n")
    for pid in sorted(cs.boundary):
        name = layout.partition_by_id(pid).name
        if not wrote_any:
            out.write("\n")
            wrote_any = True
        out.write(f"CONSTRAINT boundary {name} {','.join(cs.boundary[pid])}\n")
    for pid in sorted(cs.preplaced):
        x, y = cs.preplaced[pid]
        name = layout.partition_by_id(pid).name
        if not wrote_any:
            out.write("\n")
            wrote_any = True
        out.write(f"CONSTRAINT preplace {name} {x} {y}\n")
    for cid, cluster in enumerate(cs.clusters):
        names = " ".join(layout.partition_by_id(pid).name for pid in cluster)
        if not wrote_any:
            out.write("\n")
            wrote_any = True
        out.write(f"CONSTRAINT cluster {cid} {names}\n")
    for gid, group in enumerate(cs.multi_inst):
        names = " ".join(layout.partition_by_id(pid).name for pid in group)
        if not wrote_any:
            out.write("\n")
            wrote_any = True
        out.write(f"CONSTRAINT multiinst {gid} {names}\n")
    blocks_text = out.getvalue()

    out = io.StringIO()
    out.write("FloorSet nets 1.0\n\n")
    out.write(f"NumNets : {len(layout.nets)}\n")
    out.write(f"NumPins : {2 * len(layout.nets)}\n\n")
    name_of_part = {p.id: p.name for p in parts}
    name_of_term = {t.id: t.name for t in terms}
    for net in layout.nets:
        out.write(f"NetDegree : 2 {_num(net.weight)}\n")
        if net.kind == "b2b":
            out.write(f"{name_of_part[net.a]} B\n")
            out.write(f"{name_of_part[net.b]} B\n")
        else:
            out.write(f"{name_of_term[net.a]} T\n")
            out.write(f"{name_of_part[net.b]} B\n")
    nets_text = out.getvalue()

    out = io.StringIO()
    out.write("FloorSet pl 1.0\n\n")
    for t in terms:
        out.write(f"{t.name} {_num(t.x)} {_num(t.y)}\n")
    if soft_mode:
        out.write(f"\nBlockPlacements : {len(parts)}\n")
        for p in parts:
            x1, y1, x2, y2 = p.bbox
            out.write(f"{p.name} {x1} {y1} {x2 - x1} {y2 - y1}\n")
    pl_text = out.getvalue()

    return BookshelfFiles(blocks=blocks_text, nets=nets_text, pl=pl_text)


_RE_PROVENANCE = re.compile(
    r"#\s*provenance\s*:\s*seed=(-?\d+)\s+index=(\d+)\s+mode=(\w+)"
)
_RE_HEADER_KV = re.compile(r"(\w+)\s*:\s*(.+)")
_RE_VERTEX = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


class _Lines:
    """Line scanner that skips blanks and tracks numbers for errors."""

    def __init__(self, text: str):
        self.raw = text.splitlines()
        self.pos = 0

    def next_content(self, *, keep_comments: bool = False) -> Union[tuple[int, str], None]:
        while self.pos < len(self.raw):
            self.pos += 1
            line = self.raw[self.pos - 1].strip()
            if not line:
                continue
            if line.startswith("#") and not keep_comments:
                continue
            return (self.pos, line)
        return None

    def peek(self) -> Union[tuple[int, str], None]:
        saved = self.pos
        item = self.next_content()
        self.pos = saved
        return item


def _parse_int(tok: str, line_no: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise BookshelfSyntaxError(line_no, f"expected integer {what}, got {tok!r}")


def _parse_float(tok: str, line_no: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise BookshelfSyntaxError(line_no, f"expected number {what}, got {tok!r}")


def parse_bookshelf(files: BookshelfFiles) -> LayoutInstance:
    """Parse the triple back into a layout (labels are not recomputed here)."""
    provenance = Provenance(seed=0, index=0, mode="Prime")
    for line in files.blocks.splitlines():
        m = _RE_PROVENANCE.match(line.strip())
        if m:
            provenance = Provenance(int(m.group(1)), int(m.group(2)), m.group(3))

    scanner = _Lines(files.blocks)
    item = scanner.next_content()
    if item is None or item[1] != "FloorSet blocks 1.0":
        raise BookshelfSyntaxError(item[0] if item else 0, "missing blocks header")

    outline = None
    counts: dict[str, int] = {}
    soft_specs: dict[str, tuple[int, float, float]] = {}
    hard_polys: dict[str, RectilinearPolygon] = {}
    order: list[str] = []
    constraints_raw: list[tuple[int, list[str]]] = []

    while (item := scanner.next_content()) is not None:
        line_no, line = item
        toks = line.split()
        if line.startswith("Outline"):
            m = _RE_HEADER_KV.match(line)
            if outline is not None:
                raise BookshelfSyntaxError(line_no, "duplicated Outline header")
            if not m:
                raise BookshelfSyntaxError(line_no, "malformed Outline line")
            vals = m.group(2).split()
            if len(vals) != 2:
                raise BookshelfSyntaxError(line_no, "Outline needs W and H")
            outline = FixedOutline(
                _parse_int(vals[0], line_no, "outline width"),
                _parse_int(vals[1], line_no, "outline height"),
            )
        elif toks[0] in ("NumHardRectilinearBlocks", "NumSoftRectangularBlocks", "NumTerminals"):
            m = _RE_HEADER_KV.match(line)
            if not m:
                raise BookshelfSyntaxError(line_no, f"malformed {toks[0]} line")
            if toks[0] in counts:
                raise BookshelfSyntaxError(line_no, f"duplicated {toks[0]} header")
            counts[toks[0]] = _parse_int(m.group(2).strip(), line_no, toks[0])
        elif toks[0] == "CONSTRAINT":
            constraints_raw.append((line_no, toks[1:]))
        elif len(toks) >= 2 and toks[1] == "hardrectilinear":
            name = toks[0]
            if name in hard_polys or name in soft_specs:
                raise BookshelfSyntaxError(line_no, f"duplicate block {name}")
            k = _parse_int(toks[2], line_no, "vertex count")
            verts = _RE_VERTEX.findall(line)
            if len(verts) != k:
                raise BookshelfSyntaxError(
                    line_no, f"declared {k} vertices but found {len(verts)}"
                )
            hard_polys[name] = RectilinearPolygon(
                tuple((int(x), int(y)) for x, y in verts)
            )
            order.append(name)
        elif len(toks) >= 2 and toks[1] == "softrectangular":
            name = toks[0]
            if name in hard_polys or name in soft_specs:
                raise BookshelfSyntaxError(line_no, f"duplicate block {name}")
            if len(toks) != 5:
                raise BookshelfSyntaxError(line_no, "softrectangular needs area minAR maxAR")
            soft_specs[name] = (
                _parse_int(toks[2], line_no, "area"),
                _parse_float(toks[3], line_no, "minAR"),
                _parse_float(toks[4], line_no, "maxAR"),
            )
            order.append(name)
        else:
            raise BookshelfSyntaxError(line_no, f"unrecognized blocks line: {line!r}")

    if outline is None:
        raise BookshelfSemanticError("blocks file has no Outline")
    n_hard = counts.get("NumHardRectilinearBlocks", 0)
    n_soft = counts.get("NumSoftRectangularBlocks", 0)
    if len(hard_polys) != n_hard:
        raise BookshelfSemanticError(
            f"NumHardRectilinearBlocks is {n_hard} but {len(hard_polys)} were defined"
        )
    if len(soft_specs) != n_soft:
        raise BookshelfSemanticError(
            f"NumSoftRectangularBlocks is {n_soft} but {len(soft_specs)} were defined"
        )

    # --- .pl: terminals, plus block placements for soft layouts
    scanner = _Lines(files.pl)
    item = scanner.next_content()
    if item is None or item[1] != "FloorSet pl 1.0":
        raise BookshelfSyntaxError(item[0] if item else 0, "missing pl header")
    terminals: dict[str, Terminal] = {}
    placements: dict[str, tuple[int, int, int, int]] = {}
    in_placements = False
    n_placements = None
    while (item := scanner.next_content()) is not None:
        line_no, line = item
        toks = line.split()
        if toks[0] == "BlockPlacements":
            m = _RE_HEADER_KV.match(line)
            if not m or in_placements:
                raise BookshelfSyntaxError(line_no, "malformed BlockPlacements header")
            in_placements = True
            n_placements = _parse_int(m.group(2).strip(), line_no, "placement count")
        elif in_placements:
            if len(toks) != 5:
                raise BookshelfSyntaxError(line_no, "placement needs name x y w h")
            placements[toks[0]] = tuple(
                _parse_int(t, line_no, "placement field") for t in toks[1:]
            )
        else:
            if len(toks) != 3:
                raise BookshelfSyntaxError(line_no, "terminal needs name x y")
            name = toks[0]
            if name in terminals:
                raise BookshelfSyntaxError(line_no, f"duplicate terminal {name}")
            x = _parse_float(toks[1], line_no, "terminal x")
            y = _parse_float(toks[2], line_no, "terminal y")
            if not outline.on_perimeter(x, y):
                raise BookshelfSemanticError(
                    f"terminal {name} at ({x}, {y}) is not on the outline perimeter"
                )
            terminals[name] = Terminal(id=len(terminals), x=x, y=y)
    if counts.get("NumTerminals", len(terminals)) != len(terminals):
        raise BookshelfSemanticError(
            f"NumTerminals is {counts.get('NumTerminals')} but {len(terminals)} were placed"
        )
    if n_placements is not None and n_placements != len(placements):
        raise BookshelfSemanticError(
            f"BlockPlacements is {n_placements} but {len(placements)} lines followed"
        )

    partitions: list[Partition] = []
    part_id: dict[str, int] = {}
    shape_range: dict[int, tuple[float, float]] = {}
    for name in order:
        pid = len(partitions)
        if name in hard_polys:
            poly = hard_polys[name]
        else:
            if name not in placements:
                raise BookshelfSemanticError(f"soft block {name} has no placement")
            x, y, w, h = placements[name]
            area = soft_specs[name][0]
            if w * h != area:
                raise BookshelfSemanticError(
                    f"block {name}: placement {w}x{h} does not match area {area}"
                )
            poly = RectilinearPolygon.from_rect(x, y, x + w, y + h)
            shape_range[pid] = (soft_specs[name][1], soft_specs[name][2])
        partitions.append(Partition(id=pid, shape=poly, name=name))
        part_id[name] = pid

    # --- .nets
    scanner = _Lines(files.nets)
    item = scanner.next_content()
    if item is None or item[1] != "FloorSet nets 1.0":
        raise BookshelfSyntaxError(item[0] if item else 0, "missing nets header")
    term_id = {t_name: t.id for t_name, t in terminals.items()}
    n_nets = None
    n_pins = None
    nets: list[Net] = []
    while (item := scanner.next_content()) is not None:
        line_no, line = item
        toks = line.split()
        if toks[0] == "NumNets":
            if n_nets is not None:
                raise BookshelfSyntaxError(line_no, "duplicated NumNets header")
            n_nets = _parse_int(toks[-1], line_no, "net count")
        elif toks[0] == "NumPins":
            if n_pins is not None:
                raise BookshelfSyntaxError(line_no, "duplicated NumPins header")
            n_pins = _parse_int(toks[-1], line_no, "pin count")
        elif toks[0] == "NetDegree":
            if len(toks) != 4 or toks[1] != ":" or toks[2] != "2":
                raise BookshelfSyntaxError(line_no, "only 2-pin 'NetDegree : 2 <w>' nets are supported")
            weight = _parse_float(toks[3], line_no, "net weight")
            ends = []
            for _ in range(2):
                nxt = scanner.next_content()
                if nxt is None:
                    raise BookshelfSyntaxError(line_no, "net is missing endpoint lines")
                e_no, e_line = nxt
                et = e_line.split()
                if len(et) != 2 or et[1] not in ("B", "T"):
                    raise BookshelfSyntaxError(e_no, "endpoint needs '<name> B|T'")
                ends.append((et[0], et[1], e_no))
            kinds = sorted(e[1] for e in ends)
            for ename, ekind, e_no in ends:
                if ekind == "B" and ename not in part_id:
                    raise BookshelfSemanticError(f"net references undeclared block {ename}")
                if ekind == "T" and ename not in term_id:
                    raise BookshelfSemanticError(f"net references undeclared terminal {ename}")
            if kinds == ["B", "B"]:
                a, b = sorted(part_id[e[0]] for e in ends)
                nets.append(Net(kind="b2b", a=a, b=b, weight=weight))
            elif kinds == ["B", "T"]:
                t = next(e for e in ends if e[1] == "T")
                p = next(e for e in ends if e[1] == "B")
                nets.append(Net(kind="t2b", a=term_id[t[0]], b=part_id[p[0]], weight=weight))
            else:
                raise BookshelfSemanticError("terminal-terminal nets are not supported")
        else:
            raise BookshelfSyntaxError(line_no, f"unrecognized nets line: {line!r}")
    if n_nets is not None and n_nets != len(nets):
        raise BookshelfSemanticError(f"NumNets is {n_nets} but {len(nets)} nets were defined")
    if n_pins is not None and n_pins != 2 * len(nets):
        raise BookshelfSemanticError(f"NumPins is {n_pins}, expected {2 * len(nets)}")

    # --- constraints
    cs = ConstraintSet(shape_range=shape_range)

    def block_ref(name: str, line_no: int) -> int:
        if name not in part_id:
            raise BookshelfSemanticError(f"constraint references unknown block {name}")
        return part_id[name]

    for line_no, toks in constraints_raw:
        if not toks:
            raise BookshelfSyntaxError(line_no, "empty CONSTRAINT line")
        kind = toks[0]
        if kind == "shaperange":
            if len(toks) != 4:
                raise BookshelfSyntaxError(line_no, "shaperange needs name min max")
            cs.shape_range[block_ref(toks[1], line_no)] = (
                _parse_float(toks[2], line_no, "minAR"),
                _parse_float(toks[3], line_no, "maxAR"),
            )
        elif kind == "boundary":
            if len(toks) != 3:
                raise BookshelfSyntaxError(line_no, "boundary needs name edge[,edge]")
            cs.boundary[block_ref(toks[1], line_no)] = tuple(toks[2].split(","))
        elif kind == "preplace":
            if len(toks) != 4:
                raise BookshelfSyntaxError(line_no, "preplace needs name x y")
            cs.preplaced[block_ref(toks[1], line_no)] = (
                _parse_int(toks[2], line_no, "x"),
                _parse_int(toks[3], line_no, "y"),
            )
        elif kind == "cluster":
            if len(toks) < 3:
                raise BookshelfSyntaxError(line_no, "cluster needs id and members")
            cs.clusters.append(tuple(sorted(block_ref(n, line_no) for n in toks[2:])))
        elif kind == "multiinst":
            if len(toks) < 3:
                raise BookshelfSyntaxError(line_no, "multiinst needs id and members")
            cs.multi_inst.append(tuple(sorted(block_ref(n, line_no) for n in toks[2:])))
        else:
            raise BookshelfSyntaxError(line_no, f"unknown constraint kind {kind!r}")
    cs.clusters.sort()
    cs.multi_inst.sort()
    cs.validate()

    layout = LayoutInstance(
        outline=outline,
        partitions=partitions,
        terminals=sorted(terminals.values(), key=lambda t: t.id),
        nets=nets,
        constraints=cs,
        provenance=provenance,
    )
    return layout


def write_bookshelf_dir(layout: LayoutInstance, directory, stem: str) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = write_bookshelf(layout)
    paths = []
    for suffix, text in (("blocks", files.blocks), ("nets", files.nets), ("pl", files.pl)):
        p = d / f"{stem}.{suffix}"
        p.write_text(text)
        paths.append(p)
    return paths


def read_bookshelf_dir(directory, stem: str) -> LayoutInstance:
    d = Path(directory)
    return parse_bookshelf(
        BookshelfFiles(
            blocks=(d / f"{stem}.blocks").read_text(),
            nets=(d / f"{stem}.nets").read_text(),
            pl=(d / f"{stem}.pl").read_text(),
        )
    )


# ---------------------------------------------------------------------------
# Dataset container


def _instance_to_record(inst: LayoutInstance) -> dict:
    cs = inst.constraints
    return {
        "index": inst.provenance.index,
        "seed": inst.provenance.seed,
        "mode": inst.provenance.mode,
        "outline": [inst.outline.width, inst.outline.height],
        "partitions": [
            {"id": p.id, "name": p.name, "vertices": [list(v) for v in p.shape.vertices]}
            for p in sorted(inst.partitions, key=lambda p: p.id)
        ],
        "terminals": [[t.id, t.x, t.y] for t in sorted(inst.terminals, key=lambda t: t.id)],
        "nets": [[n.kind, n.a, n.b, n.weight] for n in inst.nets],
        "constraints": {
            "boundary": {str(k): list(v) for k, v in sorted(cs.boundary.items())},
            "preplaced": {str(k): list(v) for k, v in sorted(cs.preplaced.items())},
            "clusters": [list(c) for c in cs.clusters],
            "multi_inst": [list(g) for g in cs.multi_inst],
            "shape_range": {str(k): list(v) for k, v in sorted(cs.shape_range.items())},
        },
        "labels": list(inst.labels) if inst.labels is not None else None,
        "diag": inst.diag,
    }


def _record_to_instance(rec: dict) -> LayoutInstance:
    outline = FixedOutline(rec["outline"][0], rec["outline"][1])
    partitions = [
        Partition(
            id=p["id"],
            name=p["name"],
            shape=RectilinearPolygon(tuple((x, y) for x, y in p["vertices"])),
        )
        for p in rec["partitions"]
    ]
    terminals = [Terminal(id=t[0], x=t[1], y=t[2]) for t in rec["terminals"]]
    nets = [Net(kind=n[0], a=n[1], b=n[2], weight=n[3]) for n in rec["nets"]]
    c = rec["constraints"]
    cs = ConstraintSet(
        boundary={int(k): tuple(v) for k, v in c["boundary"].items()},
        preplaced={int(k): tuple(v) for k, v in c["preplaced"].items()},
        clusters=[tuple(x) for x in c["clusters"]],
        multi_inst=[tuple(x) for x in c["multi_inst"]],
        shape_range={int(k): tuple(v) for k, v in c["shape_range"].items()},
    )
    inst = LayoutInstance(
        outline=outline,
        partitions=partitions,
        terminals=terminals,
        nets=nets,
        constraints=cs,
        provenance=Provenance(seed=rec["seed"], index=rec["index"], mode=rec["mode"]),
        labels=tuple(rec["labels"]) if rec["labels"] is not None else None,
    )
    inst.diag = rec.get("diag", {})
    return inst


def write_dataset(instances: list[LayoutInstance], path) -> None:
    """Length-framed container, byte-deterministic for identical instances."""
    mode = instances[0].provenance.mode if instances else "empty"
    header = {
        "schema": DATA_SCHEMA,
        "mode": mode,
        "count": len(instances),
    }
    with open(path, "wb") as f:
        f.write(f"{DATA_MAGIC} {DATA_VERSION}\n".encode())
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        for inst in instances:
            payload = json.dumps(
                _instance_to_record(inst), sort_keys=True, separators=(",", ":")
            ).encode()
            f.write(f"RECORD {len(payload)}\n".encode())
            f.write(payload + b"\n")


def read_dataset(path) -> list[LayoutInstance]:
    with open(path, "rb") as f:
        magic = f.readline().decode().rstrip("\n")
        parts = magic.split()
        if len(parts) != 2 or parts[0] != DATA_MAGIC:
            raise DatasetError(f"not a dataset container: header {magic!r}")
        if parts[1] != DATA_VERSION:
            raise DatasetError(
                f"unsupported container version {parts[1]!r}, expected {DATA_VERSION!r}"
            )
        header_line = f.readline().decode()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"bad container header: {e}") from e
        if header.get("schema") != DATA_SCHEMA:
            raise DatasetError(f"unexpected schema {header.get('schema')!r}")
        count = header.get("count", 0)
        instances = []
        for k in range(count):
            frame = f.readline().decode()
            if not frame.startswith("RECORD "):
                raise DatasetError(f"record {k}: missing RECORD frame (truncated file?)")
            try:
                length = int(frame.split()[1])
            except (IndexError, ValueError):
                raise DatasetError(f"record {k}: malformed frame {frame!r}")
            payload = f.read(length)
            if len(payload) != length:
                raise DatasetError(f"record {k}: truncated payload")
            nl = f.read(1)
            if nl != b"\n":
                raise DatasetError(f"record {k}: missing frame terminator")
            instances.append(_record_to_instance(json.loads(payload)))
        if f.read(1) != b"":
            raise DatasetError("trailing bytes after the declared record count")
    return instances
