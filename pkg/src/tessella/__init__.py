"""tessella: brane tilings, quivers with potential, orbit quivers, and
finite-field representation counts.

Submodules:

* :mod:`tessella.surfacemap`   -- combinatorial maps, tilings, dual quivers
* :mod:`tessella.pathalg`      -- exact path-algebra arithmetic
* :mod:`tessella.equivariant`  -- automorphisms, orbit quiver, xi, transport
* :mod:`tessella.repcount`     -- finite-field representation enumeration
* :mod:`tessella.presentation` -- surface groups, Psi, derivation scripts
* :mod:`tessella.cli`          -- the ``tessella`` command
"""

__version__ = "0.1.0"
