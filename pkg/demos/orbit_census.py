"""Count relabeling orbits across block shapes.

Every treatment assignment on an a x b grid belongs to an orbit under
the t! relabelings, and the orbit count follows from Stirling numbers.
This walks a few shapes, confirms the formula against a streamed
enumeration, and shows the census the enumerate command reports.
"""

from fielddesign.arrays import Shape, enumerate_orbits, orbit_count


def main() -> None:
    print(f"{'shape':>10} {'arrays':>12} {'orbits':>8}  largest orbit")
    for a, b, t in [(2, 2, 2), (2, 3, 2), (2, 3, 3), (3, 3, 3), (3, 4, 3)]:
        shape = Shape(a, b, t)
        arrays = t ** shape.p
        count = orbit_count(shape)
        if count <= 100_000:
            orbits = list(enumerate_orbits(shape))
            assert len(orbits) == count
            assert sum(o.size for o in orbits) == arrays
            widest = max(orbits, key=lambda o: o.size)
            note = f"{widest.size} members, e.g. {widest.representative}"
        else:
            note = "(not enumerated)"
        print(f"({a},{b},{t}):{arrays:>12}{count:>9}  {note}")


if __name__ == "__main__":
    main()
