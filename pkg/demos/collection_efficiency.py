"""Light collection from an isotropic emitter.

Compares a high-NA mirror with a conventional NA 0.25 objective, and
checks the estimate for the real square mirror outline.

Run from the repository root:  python3 demos/collection_efficiency.py
"""

from ionmirror import evaluation as ev

hi = ev.collection_efficiency(ev.CircularNA(0.9))
lo = ev.collection_efficiency(ev.CircularNA(0.25))
sq = ev.collection_efficiency(ev.mirror_square_aperture())

print(f"NA 0.90 cone:     {hi:.4f} of 4 pi")
print(f"NA 0.25 cone:     {lo:.5f} of 4 pi")
print(f"square mirror:    {sq:.4f} of 4 pi")
print(f"gain over NA 0.25: circular {hi / lo:.2f}x, square {sq / lo:.2f}x")
