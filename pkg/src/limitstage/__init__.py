"""limitstage: stagewise structure constructions driven by scripted oracles.

The package builds countable structures (finite relational structures,
rational vector spaces, ordered fields, abelian p-groups, dense linear
orders) in stages, where each stage consults a finite script standing in
for an approximation oracle.  Every construction keeps a monotone atomic
diagram and a partial embedding that may be rolled back to an earlier
stage when the script changes its mind; the roll-back discipline is what
the test suite exercises hardest.

Modules
-------
oracles        script tables with declared limit behaviour
stagemachine   the generic stage/look-back engine
finitestructs  finite relational structures and their case-table runs
qvector        exact rational vector spaces
realfields     real algebraic numbers and ordered-field targets
pgroups        abelian p-group summand ledgers and Ulm invariants
ehrenfeucht    dense linear orders with an increasing constant chain
scott          infinitary sentence ASTs, classification, evaluation
cli            the ``limitstage`` command line front end
"""

__version__ = "0.1.0"
