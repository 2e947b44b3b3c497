"""Abstract vector machines: a memory space plus instruction procedures."""

import json
import os
from dataclasses import dataclass, field

from ..errors import SchedulingError
from ..memory import register_memory
from ..parser import parse_file

MACHINE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "machines")

# ops every machine must provide
REQUIRED_OPS = ("load", "store", "broadcast", "add", "mul")


@dataclass
class MachineDescription:
    name: str
    mem_type: str
    vec_widths: dict
    instrs: dict  # op name -> instruction Procedure
    has_fma: bool = False
    supports_predication: bool = False
    lanes: int = 8
    c_type: str = None
    extra: dict = field(default_factory=dict)

    def vec_width(self, precision):
        w = self.vec_widths.get(precision)
        if w is None:
            raise SchedulingError(f"machine '{self.name}' has no {precision} vectors")
        return w

    def get_instructions(self, precision=None, predicated=None):
        """Instruction procedures, plain ones first."""
        plain = [p for k, p in self.instrs.items() if not k.endswith("_pred")]
        pred = [p for k, p in self.instrs.items() if k.endswith("_pred")]
        if predicated is None:
            return plain + pred
        return pred if predicated else plain

    @property
    def patterns(self):
        return self.get_instructions()

    def op(self, name):
        return self.instrs.get(name)


def load_machine(path_or_name):
    """Load a machine from a JSON description (or a bundled machine name)."""
    path = path_or_name
    if not os.path.exists(path):
        path = os.path.join(MACHINE_DIR, f"{path_or_name}.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no machine description '{path_or_name}'")
    with open(path, encoding="utf-8") as f:
        d = json.load(f)
    mem = d["memory"]
    register_memory(mem["name"], "vector", mem.get("c_type"), mem.get("lanes"), mem.get("elem"))
    ifile = os.path.join(os.path.dirname(path), d["instructions"])
    procs = parse_file(ifile)
    instrs = {}
    for op, pname in d["ops"].items():
        if pname not in procs:
            raise ValueError(f"machine '{d['name']}': instruction '{pname}' not found in {d['instructions']}")
        instrs[op] = procs[pname]
    missing = [op for op in REQUIRED_OPS if op not in instrs]
    if missing:
        raise ValueError(f"machine '{d['name']}' lacks {', '.join(missing)}")
    return MachineDescription(
        name=d["name"],
        mem_type=mem["name"],
        vec_widths=dict(d["vec_width"]),
        instrs=instrs,
        has_fma=bool(d.get("has_fma")) and "fma" in instrs,
        supports_predication=bool(d.get("supports_predication")),
        lanes=mem.get("lanes", 8),
        c_type=mem.get("c_type"),
    )


def bundled_machines():
    return sorted(f[:-5] for f in os.listdir(MACHINE_DIR) if f.endswith(".json"))
