"""Neural cellular robot substrate.

A single neural cellular automaton grows a modular robot's body and
then controls it in 2D benchmark tasks; training is from-scratch CMA-ES
or CMA-ME over the automaton's flat parameter vector.
"""

__version__ = "0.1.0"
