"""Independent shape walk for the DEMNET stack.

Counts trainable parameters (conv/dense weights and biases, batch-norm
scale and shift) and the flatten width for a given configuration. The
figures printed here are pinned in tests/model_test.cpp.
"""
import sys


def walk(c, h, w, stem=16, blocks=(32, 64, 128, 256), k=3,
         dense=(512, 128, 64), classes=4, p=2, s=2):
    params = 0

    def conv(cin, cout):
        return cout * cin * k * k + cout

    def pool(x):
        return (x - p) // s + 1 if x >= p else 0

    params += conv(c, stem) + conv(stem, stem)
    h, w = pool(h), pool(w)
    cin = stem
    for f in blocks:
        params += conv(cin, f) + conv(f, f) + 2 * f
        h, w = pool(h), pool(w)
        cin = f
    flat = cin * h * w
    din = flat
    for units in list(dense) + [classes]:
        params += din * units + units
        din = units
    return flat, h, w, params


if __name__ == "__main__":
    print("default 1x128x128", walk(1, 128, 128))
    print("tiny 1x8x8 stem4 blocks(4,8) dense(8,8,8)",
          walk(1, 8, 8, stem=4, blocks=(4, 8), dense=(8, 8, 8)))
    sys.exit(0)
