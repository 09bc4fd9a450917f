"""Domain model for school choice with bundled applications.

A *bundle* groups several schools into a single rank-order-list option: a
student who lists a bundle asks for a seat at any school inside it.  A bundle
system must satisfy three structural conditions:

1. hierarchy -- any two overlapping bundles are nested;
2. monotonicity in target -- a bigger bundle is open to weakly fewer students;
3. every individual school stays available as a one-school (trivial) bundle.

Additionally every bundle must be *priority-uniform*: all schools in the
bundle rank the bundle's eligible students in the same relative order.

Identifiers are strings throughout; canonical order is file order.  Trivial
bundles are synthesized automatically (one per school, id = school id,
targeting everyone) and must not be spelled out in the input.
"""

from dataclasses import dataclass, field


UNMATCHED = None


@dataclass(frozen=True)
class School:
    id: str
    quota: int
    priority: tuple  # strict order over all student ids, best first

    def rank(self, student):
        return self.priority.index(student)


@dataclass(frozen=True)
class Bundle:
    id: str
    schools: frozenset  # school ids
    targets: frozenset  # student ids eligible to list this bundle

    @property
    def trivial(self):
        return len(self.schools) == 1


@dataclass
class ValidationReport:
    """Outcome of structural validation; `ok` iff no problems were found."""

    problems: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.problems

    def add(self, message):
        self.problems.append(message)

    def __str__(self):
        return "\n".join(self.problems) if self.problems else "ok"


class Instance:
    """A fully validated market: students, schools, bundle system, ROL cap.

    Construction is reserved for `validate_instance`; everything here is
    immutable after that and safe to share.
    """

    def __init__(self, students, schools, bundles, rol_length):
        self.students = tuple(students)
        self.schools = {s.id: s for s in schools}
        self.school_order = tuple(s.id for s in schools)
        self.bundles = {b.id: b for b in bundles}
        self.bundle_order = tuple(b.id for b in bundles)
        self.rol_length = rol_length
        self._ranks = {
            s.id: {i: r for r, i in enumerate(s.priority)} for s in schools
        }
        self._by_schools = {b.schools: b for b in bundles}
        self._student_index = {i: k for k, i in enumerate(self.students)}

    def rank(self, school_id, student):
        """Priority position of a student at a school (0 = best)."""
        return self._ranks[school_id][student]

    def prefers(self, school_id, i, j):
        """True if school ranks student i strictly above student j."""
        ranks = self._ranks[school_id]
        return ranks[i] < ranks[j]

    def bundle_quota(self, bundle_id):
        return sum(self.schools[s].quota for s in self.bundles[bundle_id].schools)

    def bundle_for_schools(self, school_set):
        return self._by_schools.get(frozenset(school_set))

    def trivial_bundle(self, school_id):
        return self._by_schools[frozenset({school_id})]

    def menu(self, student):
        """Bundle ids the student is eligible to list, in canonical order."""
        return [
            b for b in self.bundle_order if student in self.bundles[b].targets
        ]

    def sup_bundles(self, bundle_id):
        """Ids of bundles whose school set weakly contains this one's."""
        own = self.bundles[bundle_id].schools
        return [
            b for b in self.bundle_order if own <= self.bundles[b].schools
        ]

    def sub_bundles(self, bundle_id):
        own = self.bundles[bundle_id].schools
        return [
            b for b in self.bundle_order if self.bundles[b].schools <= own
        ]

    def student_key(self, student):
        return self._student_index[student]


def _ordered_unique(items):
    seen = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def validate_instance(raw):
    """Check a parsed instance description against all structural rules.

    `raw` is a mapping with keys `students`, `schools`, `bundles`,
    `rol_length` (see the README for the document schema).  Returns a
    validated `Instance` on success and a `ValidationReport` listing every
    violated condition otherwise.  The input is never mutated.
    """
    report = ValidationReport()

    students = list(raw.get("students", []))
    if not students:
        report.add("instance lists no students")
    if len(students) != len(set(students)):
        report.add("duplicate student ids")

    schools = []
    for entry in raw.get("schools", []):
        sid = entry["id"]
        quota = entry["quota"]
        priority = tuple(entry["priority"])
        if quota < 1:
            report.add(f"school {sid}: quota must be at least 1")
        if sorted(priority) != sorted(students):
            report.add(
                f"school {sid}: priority order is not a permutation of the students"
            )
        schools.append(School(sid, quota, priority))
    school_ids = [s.id for s in schools]
    if not schools:
        report.add("instance lists no schools")
    if len(school_ids) != len(set(school_ids)):
        report.add("duplicate school ids")

    student_set = set(students)
    school_set = set(school_ids)

    # Trivial bundles are implicit: one per school, open to everyone.
    bundles = [
        Bundle(sid, frozenset({sid}), frozenset(student_set)) for sid in school_ids
    ]
    for entry in raw.get("bundles", []):
        bid = entry["id"]
        bschools = frozenset(entry["schools"])
        targets = entry.get("targets", "all")
        if targets == "all":
            targets = frozenset(student_set)
        else:
            targets = frozenset(targets)
        if bid in school_set:
            report.add(
                f"bundle {bid}: id collides with a school id "
                "(one-school bundles are implicit; do not list them)"
            )
        if len(bschools) == 1:
            report.add(
                f"bundle {bid}: one-school bundles are implicit; do not list them"
            )
        if not bschools:
            report.add(f"bundle {bid}: empty school set")
        if not bschools <= school_set:
            report.add(f"bundle {bid}: unknown schools {sorted(bschools - school_set)}")
        if not targets:
            report.add(f"bundle {bid}: empty target set")
        if not targets <= student_set:
            report.add(f"bundle {bid}: unknown students {sorted(targets - student_set)}")
        bundles.append(Bundle(bid, bschools, targets))

    bundle_ids = [b.id for b in bundles]
    if len(bundle_ids) != len(set(bundle_ids)):
        report.add("duplicate bundle ids")
    by_schools = {}
    for b in bundles:
        other = by_schools.get(b.schools)
        if other is not None:
            report.add(
                f"bundles {other.id} and {b.id} share the school set "
                f"{sorted(b.schools)}; merge them into one"
            )
        by_schools[b.schools] = b

    for a in bundles:
        for b in bundles:
            if a.id >= b.id:
                continue
            inter = a.schools & b.schools
            if inter and not (a.schools < b.schools or b.schools < a.schools):
                report.add(
                    f"bundles {a.id} and {b.id} overlap without nesting "
                    f"(shared schools {sorted(inter)})"
                )
        # monotonicity: growing the school set may only shrink the audience
        for b in bundles:
            if a.schools < b.schools and not a.targets >= b.targets:
                report.add(
                    f"bundle {b.id} targets students outside the smaller "
                    f"bundle {a.id}'s target set: "
                    f"{sorted(b.targets - a.targets)}"
                )

    rank_maps = {s.id: {i: r for r, i in enumerate(s.priority)} for s in schools}
    for b in bundles:
        if b.trivial or not b.schools <= school_set:
            continue
        if any(not b.targets <= set(rank_maps[s]) for s in b.schools):
            continue  # unreadable priorities were already reported above
        pair = sorted(b.schools)
        base = pair[0]
        for other in pair[1:]:
            for i in b.targets:
                for j in b.targets:
                    if i >= j:
                        continue
                    same = (rank_maps[base][i] < rank_maps[base][j]) == (
                        rank_maps[other][i] < rank_maps[other][j]
                    )
                    if not same:
                        report.add(
                            f"bundle {b.id}: schools {base} and {other} rank "
                            f"targeted students {i} and {j} differently"
                        )

    rol_length = raw.get("rol_length", 1)
    if not isinstance(rol_length, int) or rol_length < 1:
        report.add("rol_length must be a positive integer")
    elif schools and rol_length >= len(schools):
        report.add(
            f"rol_length {rol_length} must be smaller than the number of "
            f"schools ({len(schools)})"
        )

    if not report.ok:
        return report
    return Instance(students, schools, bundles, rol_length)


def validate_rols(instance, rols):
    """Check a {student: [bundle ids]} mapping against the instance.

    Returns a ValidationReport; every student must appear (possibly with an
    empty list), entries must be distinct bundles the student may list, and
    lists must respect the length cap.
    """
    report = ValidationReport()
    for i in rols:
        if i not in instance._student_index:
            report.add(f"unknown student {i} in ROL file")
    for i in instance.students:
        entries = list(rols.get(i, []))
        if len(entries) > instance.rol_length:
            report.add(
                f"student {i}: {len(entries)} entries exceed the cap of "
                f"{instance.rol_length}"
            )
        if len(entries) != len(set(entries)):
            report.add(f"student {i}: repeated bundle in ROL")
        for b in entries:
            if b not in instance.bundles:
                report.add(f"student {i}: unknown bundle {b}")
            elif i not in instance.bundles[b].targets:
                report.add(f"student {i}: not eligible to list bundle {b}")
    return report


@dataclass(frozen=True)
class SubHierarchy:
    """One branch of a simple system: nested bundles under a common order."""

    schools: frozenset
    bundle_ids: tuple
    order: tuple  # the shared priority order governing every school inside


@dataclass(frozen=True)
class SimplicityInfo:
    simple: bool
    hierarchies: tuple = ()
    reason: str = ""


def detect_simplicity(instance):
    """Decide whether every bundle's schools share one full priority order.

    When they do, the bundle system splits into disjoint sub-hierarchies --
    one per maximal bundle -- and each sub-hierarchy is governed by a single
    order over students.  Returns a SimplicityInfo either way.
    """
    for bid in instance.bundle_order:
        bundle = instance.bundles[bid]
        if bundle.trivial:
            continue
        orders = {instance.schools[s].priority for s in bundle.schools}
        if len(orders) > 1:
            return SimplicityInfo(
                False, reason=f"schools in bundle {bid} use different priority orders"
            )

    maximal = [
        bid
        for bid in instance.bundle_order
        if not any(
            instance.bundles[bid].schools < instance.bundles[other].schools
            for other in instance.bundle_order
        )
    ]
    hierarchies = []
    for bid in maximal:
        top = instance.bundles[bid]
        inside = tuple(
            other
            for other in instance.bundle_order
            if instance.bundles[other].schools <= top.schools
        )
        any_school = min(top.schools)
        hierarchies.append(
            SubHierarchy(top.schools, inside, instance.schools[any_school].priority)
        )
    return SimplicityInfo(True, tuple(hierarchies))


class InducedPreference:
    """Weak order over schools read off a ROL by first occurrence.

    Schools first appearing in the same ROL entry are indifferent; schools
    never appearing are unacceptable (worse than staying unmatched).
    """

    def __init__(self, classes):
        self.classes = tuple(frozenset(c) for c in classes)
        self._rank = {}
        for level, cls in enumerate(self.classes):
            for s in cls:
                self._rank[s] = level

    def rank_of(self, school):
        """Indifference-class index (0 = best); None if unacceptable."""
        if school is UNMATCHED:
            return len(self.classes)
        return self._rank.get(school)

    def acceptable(self, school):
        return school in self._rank

    def strictly_prefers(self, a, b):
        """True if school a beats school/unmatched b (None = unmatched)."""
        ra = self.rank_of(a)
        if ra is None:
            return False
        rb = self.rank_of(b)
        if rb is None:
            rb = len(self.classes)
        return ra < rb


def induced_preference(rol_entries, instance):
    """Build the first-occurrence weak order for one student's ROL."""
    seen = set()
    classes = []
    for bid in rol_entries:
        fresh = instance.bundles[bid].schools - seen
        if fresh:
            classes.append(fresh)
            seen |= fresh
    return InducedPreference(classes)


class BundleMatching:
    """Assignment of students to bundles (or unmatched) with seat accounting.

    The occupancy of a bundle counts every student sitting in it or in any
    nested sub-bundle; construction rejects assignments that overfill any
    bundle or hand a student a bundle she is not eligible for.
    """

    def __init__(self, instance, assignment):
        self.instance = instance
        self.assignment = {i: assignment.get(i) for i in instance.students}
        for i, bid in self.assignment.items():
            if bid is None:
                continue
            if bid not in instance.bundles:
                raise ValueError(f"student {i} assigned to unknown bundle {bid}")
            if i not in instance.bundles[bid].targets:
                raise ValueError(f"student {i} is not eligible for bundle {bid}")
        for bid in instance.bundle_order:
            if self.occupancy(bid) > instance.bundle_quota(bid):
                raise ValueError(f"bundle {bid} is over capacity")

    def __getitem__(self, student):
        return self.assignment[student]

    def __eq__(self, other):
        return (
            isinstance(other, BundleMatching) and self.assignment == other.assignment
        )

    def occupancy(self, bundle_id):
        """Students who must occupy seats inside this bundle's schools."""
        inside = self.instance.bundles[bundle_id].schools
        return sum(
            1
            for bid in self.assignment.values()
            if bid is not None and self.instance.bundles[bid].schools <= inside
        )

    def matched_students(self):
        return {i for i, bid in self.assignment.items() if bid is not None}

    def as_dict(self):
        return dict(self.assignment)


class StandardMatching:
    """Assignment of students to individual schools (or unmatched)."""

    def __init__(self, instance, assignment):
        self.instance = instance
        self.assignment = {i: assignment.get(i) for i in instance.students}
        for i, sid in self.assignment.items():
            if sid is not None and sid not in instance.schools:
                raise ValueError(f"student {i} assigned to unknown school {sid}")
        for sid, school in instance.schools.items():
            if self.seated(sid) > school.quota:
                raise ValueError(f"school {sid} is over capacity")

    def __getitem__(self, student):
        return self.assignment[student]

    def __eq__(self, other):
        return (
            isinstance(other, StandardMatching) and self.assignment == other.assignment
        )

    def __hash__(self):
        return hash(tuple(sorted(self.assignment.items(), key=lambda kv: kv[0])))

    def seated(self, school_id):
        return sum(1 for sid in self.assignment.values() if sid == school_id)

    def students_at(self, school_id):
        return [i for i, sid in self.assignment.items() if sid == school_id]

    def as_dict(self):
        return dict(self.assignment)


def implements(mu, nu):
    """True if seat assignment `mu` realizes bundle assignment `nu`."""
    for i in nu.instance.students:
        bid = nu[i]
        if bid is None:
            if mu[i] is not None:
                return False
        elif mu[i] not in nu.instance.bundles[bid].schools:
            return False
    return True
