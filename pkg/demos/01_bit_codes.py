"""Self-delimiting integer codes: the first-stage wire format.

The waiting time transmitted by the encoder is an unbounded positive
integer, so it is written with an Elias gamma code: a unary length prefix
followed by the binary digits.  No terminator is needed -- the code is
prefix-free -- which is what lets the decoder consume exactly the right
number of bits before the quantizer codeword starts.
"""

from twostage.bitcode import BitString, elias_decode, elias_encode

print("value -> codeword")
for i in (1, 2, 3, 5, 17, 100, 4096):
    print(f"{i:5d} -> {elias_encode(i)}")

print("\nlength grows as 2*floor(log2 i) + 1:")
for i in (1, 10, 100, 1000, 10_000):
    print(f"  len(gamma({i})) = {len(elias_encode(i))}")

stream = elias_encode(7) + elias_encode(1) + elias_encode(300)
print(f"\nconcatenated stream: {stream}")
cursor = 0
out = []
while cursor < len(stream):
    value, cursor = elias_decode(stream, cursor)
    out.append(value)
print(f"decoded back: {out}")

data = stream.to_bytes()
print(f"as bytes: {data.hex()} ({len(stream)} bits)")
print("round trip:", BitString.from_bytes(data, len(stream)) == stream)
