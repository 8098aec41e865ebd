# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: FNV-1a hashing, term routing and line tokenizing.

Must stay result-identical to ``_pykernels``.
"""
from libc.stdint cimport uint64_t
from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_GET_SIZE, PyBytes_FromStringAndSize
from cpython.set cimport PySet_Contains, PySet_Add
from cpython.list cimport PyList_Append

IMPLEMENTATION = "compiled"

cdef uint64_t FNV_OFFSET = 0xcbf29ce484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001b3ULL


cdef inline uint64_t _fnv(const unsigned char* p, Py_ssize_t n) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(n):
        h ^= p[i]
        h *= FNV_PRIME
    return h


cdef inline uint64_t _fnv_bytes(bytes b):
    return _fnv(<const unsigned char*>PyBytes_AS_STRING(b), PyBytes_GET_SIZE(b))


def fnv1a64(bytes data):
    return _fnv_bytes(data)


def route_terms(list terms, Py_ssize_t place_count, set seen, list groups):
    cdef Py_ssize_t added = 0
    cdef bytes t
    cdef uint64_t P = <uint64_t>place_count
    for t in terms:
        if not PySet_Contains(seen, t):
            PySet_Add(seen, t)
            PyList_Append(groups[<Py_ssize_t>(_fnv_bytes(t) % P)], t)
            added += 1
    return added


def destinations(list terms, Py_ssize_t place_count):
    cdef uint64_t P = <uint64_t>place_count
    cdef bytes t
    return [<Py_ssize_t>(_fnv_bytes(t) % P) for t in terms]


cdef inline bint _iri_char(unsigned char c) nogil:
    if c <= 0x20:
        return False
    return not (c == b'<' or c == b'>' or c == b'"' or c == b'{' or c == b'}'
                or c == b'|' or c == b'^' or c == b'`')


cdef inline bint _alpha(unsigned char c) nogil:
    return (b'A' <= c <= b'Z') or (b'a' <= c <= b'z')


cdef inline bint _alnum(unsigned char c) nogil:
    return _alpha(c) or (b'0' <= c <= b'9')


cdef inline bint _label_start(unsigned char c) nogil:
    return _alnum(c) or c == b'_' or c >= 0x80


cdef inline bint _label_char(unsigned char c) nogil:
    return _label_start(c) or c == b'-' or c == b'.'


cdef inline Py_ssize_t _skip_ws(const unsigned char* p, Py_ssize_t i, Py_ssize_t n) nogil:
    while i < n and (p[i] == b' ' or p[i] == b'\t'):
        i += 1
    return i


# Each scanner returns the end offset of the token or -1 when it does not match.
cdef Py_ssize_t _scan_iri(const unsigned char* p, Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t j
    if i >= n or p[i] != b'<':
        return -1
    j = i + 1
    while j < n and _iri_char(p[j]):
        j += 1
    if j == i + 1 or j >= n or p[j] != b'>':
        return -1
    return j + 1


cdef Py_ssize_t _scan_bnode(const unsigned char* p, Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t j
    if i + 2 >= n or p[i] != b'_' or p[i + 1] != b':' or not _label_start(p[i + 2]):
        return -1
    j = i + 3
    while j < n and _label_char(p[j]):
        j += 1
    while p[j - 1] == b'.':
        j -= 1
    return j


cdef Py_ssize_t _scan_literal(const unsigned char* p, Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t j, k
    cdef unsigned char c
    if i >= n or p[i] != b'"':
        return -1
    j = i + 1
    while True:
        if j >= n:
            return -1
        c = p[j]
        if c == b'"':
            break
        if c == b'\n' or c == b'\r' or c == b'\t':
            return -1
        if c == b'\\':
            if j + 1 >= n or p[j + 1] == b'\n' or p[j + 1] == b'\r' or p[j + 1] == b'\t':
                return -1
            j += 2
        else:
            j += 1
    j += 1
    if j < n and p[j] == b'@':
        k = j + 1
        while k < n and _alpha(p[k]):
            k += 1
        if k == j + 1:
            return j
        j = k
        while j + 1 < n and p[j] == b'-' and _alnum(p[j + 1]):
            k = j + 1
            while k < n and _alnum(p[k]):
                k += 1
            j = k
        return j
    if j + 1 < n and p[j] == b'^' and p[j + 1] == b'^':
        k = _scan_iri(p, j + 2, n)
        if k < 0:
            return j
        return k
    return j


cdef inline bint _blank(const unsigned char* p, Py_ssize_t i, Py_ssize_t n) nogil:
    i = _skip_ws(p, i, n)
    return i >= n or p[i] == b'#'


def split_statement(bytes line):
    cdef const unsigned char* p = <const unsigned char*>PyBytes_AS_STRING(line)
    cdef Py_ssize_t n = PyBytes_GET_SIZE(line)
    cdef Py_ssize_t i, e
    cdef Py_ssize_t starts[4]
    cdef Py_ssize_t ends[4]
    cdef int count = 0
    if n > 0 and p[n - 1] == b'\n':
        n -= 1
        if n > 0 and p[n - 1] == b'\r':
            n -= 1
    i = _skip_ws(p, 0, n)
    # subject
    e = _scan_iri(p, i, n)
    if e >= 0:
        starts[0] = i + 1; ends[0] = e - 1
    else:
        e = _scan_bnode(p, i, n)
        if e < 0:
            if _blank(p, 0, n):
                return None
            raise ValueError("malformed statement")
        starts[0] = i; ends[0] = e
    i = _skip_ws(p, e, n)
    # predicate
    e = _scan_iri(p, i, n)
    if e < 0:
        raise ValueError("malformed statement")
    starts[1] = i + 1; ends[1] = e - 1
    i = _skip_ws(p, e, n)
    # object
    e = _scan_iri(p, i, n)
    if e >= 0:
        starts[2] = i + 1; ends[2] = e - 1
    else:
        e = _scan_bnode(p, i, n)
        if e < 0:
            e = _scan_literal(p, i, n)
            if e < 0:
                raise ValueError("malformed statement")
        starts[2] = i; ends[2] = e
    count = 3
    i = _skip_ws(p, e, n)
    # optional graph
    e = _scan_iri(p, i, n)
    if e >= 0:
        starts[3] = i + 1; ends[3] = e - 1
        count = 4
        i = _skip_ws(p, e, n)
    else:
        e = _scan_bnode(p, i, n)
        if e >= 0:
            starts[3] = i; ends[3] = e
            count = 4
            i = _skip_ws(p, e, n)
    if i >= n or p[i] != b'.':
        raise ValueError("malformed statement")
    if not _blank(p, i + 1, n):
        raise ValueError("malformed statement")
    cdef const char* base = PyBytes_AS_STRING(line)
    if count == 3:
        return (PyBytes_FromStringAndSize(base + starts[0], ends[0] - starts[0]),
                PyBytes_FromStringAndSize(base + starts[1], ends[1] - starts[1]),
                PyBytes_FromStringAndSize(base + starts[2], ends[2] - starts[2]))
    return (PyBytes_FromStringAndSize(base + starts[0], ends[0] - starts[0]),
            PyBytes_FromStringAndSize(base + starts[1], ends[1] - starts[1]),
            PyBytes_FromStringAndSize(base + starts[2], ends[2] - starts[2]),
            PyBytes_FromStringAndSize(base + starts[3], ends[3] - starts[3]))


def encode_terms(list terms, dict dictionary, object next_ordinal, object place_count,
                 object place_index, list journal):
    cdef list ids = []
    cdef Py_ssize_t misses = 0
    cdef bytes t
    cdef object i
    cdef uint64_t n = next_ordinal
    cdef uint64_t P = place_count
    cdef uint64_t p = place_index
    for t in terms:
        i = dictionary.get(t)
        if i is None:
            if n >= (0xFFFFFFFFFFFFFFFFULL - p) // P:
                raise OverflowError("64-bit id space exhausted")
            n += 1
            i = n * P + p
            dictionary[t] = i
            journal.append((i, t))
            misses += 1
        ids.append(i)
    return ids, n, misses
