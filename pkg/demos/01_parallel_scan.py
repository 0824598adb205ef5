"""
Prefix scans with an associative operator
=========================================

The smoothers in this package are built on one primitive: an inclusive
prefix scan. This script shows the scan on toy operators and how many
combine calls the tree strategy spends.
"""
# %%
import operator

from parsmooth.scan import ScanPlan, inclusive_scan, parallel_combine_count, reverse_scan

# %%
# Integer addition: the textbook prefix sum.
print(inclusive_scan([1, 2, 3, 4], operator.add))

# %%
# String concatenation is associative but not commutative, so it checks that
# operand order survives the tree evaluation. Suffix scans run right to left.
words = list("scan")
print(inclusive_scan(words, operator.add, ScanPlan("parallel")))
print(reverse_scan(words, operator.add, ScanPlan("parallel")))

# %%
# Work of the parallel strategy versus the sequential fold.
for n in (16, 128, 1024, 1000):
    plan = ScanPlan("parallel", count_combines=True)
    inclusive_scan(list(range(n)), operator.add, plan)
    print(f"n={n:5d}  parallel combines={plan.combine_calls:5d} "
          f"(formula {parallel_combine_count(n)})  sequential={n - 1}")
