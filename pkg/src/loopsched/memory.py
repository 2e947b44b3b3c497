"""Registry of memory spaces that buffers may be placed in."""

MEMORIES = {"DRAM": {"kind": "dram", "c_type": None, "lanes": None, "elem": None}}


def register_memory(name, kind="vector", c_type=None, lanes=None, elem=None):
    """Make `name` usable with set_memory and the C back-end."""
    MEMORIES[name] = {"kind": kind, "c_type": c_type, "lanes": lanes, "elem": elem}


def known_memories():
    return sorted(MEMORIES)


def memory_info(name):
    return MEMORIES.get(name)
