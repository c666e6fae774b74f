"""dbesim: a deterministic digital business ecosystem simulator.

Habitats evolve populations of service supply chains against semantic
requests, successful services migrate along reinforced connections, and a
fitness-weighted business graph models hub emergence. Every run is a pure
function of its configuration and master seed.
"""

__version__ = "0.1.0"
