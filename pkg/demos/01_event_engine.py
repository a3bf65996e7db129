"""
The event engine
================

Integer microsecond clock, FIFO tie-breaking and named random streams.
"""

from dcsim.sim import Simulator, draw_normal, ms

sim = Simulator(seed=1)

# two events at the same instant run in the order they were scheduled
sim.schedule(5, print, "t=5us  A")
sim.schedule(5, print, "t=5us  B")
sim.schedule(ms(2), lambda: print(f"t={sim.now}us  after 2 ms"))
sim.run_until(ms(10))
print("clock now", sim.now, "us")

# each stochastic source draws from its own stream, keyed by (name, seed)
jitter = sim.stream("link1/jitter")
delays = [draw_normal(jitter, ms(10), ms(1)) / 1000 for _ in range(5)]
print("five delay draws (ms):", [round(d, 3) for d in delays])

again = Simulator(seed=1).stream("link1/jitter")
print("same stream, same draws:", delays == [draw_normal(again, ms(10), ms(1)) / 1000 for _ in range(5)])
