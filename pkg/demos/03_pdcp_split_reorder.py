"""
Splitting and reordering
========================

The server proxy stamps sequence numbers and sends batches over two links;
the client proxy restores order and gives up on a gap after t-Reordering.
"""

from dcsim.pdcp import Mode, PdcpPdu, Reorderer, Splitter, SplitterConfig
from dcsim.sim import ms

# a batch of 100 with a 9:1 ratio: 90 packets on link 1, then 10 on link 2
splitter = Splitter(SplitterConfig(batch_size=100, split=(9, 1)))
routes = [splitter.route(i, 1200, 0)[0][0] for i in range(200)]
changes = [i for i in range(1, 200) if routes[i] != routes[i - 1]]
print("link changes at packets", changes)

dup = Splitter(SplitterConfig(mode=Mode.DUPLICATE))
print("duplicate mode:", [(link, pdu.sn) for link, pdu in dup.route("x", 1200, 0)])

# the reorderer holds packets behind a gap
r = Reorderer(t_reordering=ms(200))
pdu = lambda sn: PdcpPdu(sn, f"pkt{sn}", 1200)
print(r.receive(pdu(0), 0))
print(r.receive(pdu(2), ms(1)), "timer deadline", r.timer_deadline)
print(r.receive(pdu(3), ms(2)))
# packet 1 never arrives: the timer releases everything behind it
print(r.on_timer(r.timer_deadline), "rx_deliv =", r.rx_deliv)
# a straggler that shows up afterwards is discarded and counted
print(r.receive(pdu(1), ms(300)), "window violations:", r.window_violations)
