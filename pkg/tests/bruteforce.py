"""Step-by-step reference evaluator used to re-derive expected values.

Deliberately naive: plain loops over explicit lists, no closed forms, and
nothing imported from livemig.  Inputs are in megabits / Mbps / seconds.
"""


def evaluate(memory_megabits, rates, dirties, gaps, handoff_rate):
    """Return (durations, volumes, downtime, migration_time, overhead)."""
    durations = []
    volumes = []
    for i in range(len(rates)):
        if i == 0:
            volume = memory_megabits
        else:
            volume = dirties[i - 1] * durations[i - 1]
        volumes.append(volume)
        durations.append(volume / rates[i] + gaps[i])
    stop_volume = dirties[-1] * durations[-1]
    downtime = stop_volume / handoff_rate
    migration_time = 0.0
    for t in durations:
        migration_time += t
    migration_time += downtime
    overhead = 0.0
    for v in volumes:
        overhead += v
    overhead += stop_volume
    return durations, volumes, downtime, migration_time, overhead


def evaluate_precopy(memory_megabits, rate, dirty, delay, rounds):
    return evaluate(memory_megabits, [rate] * rounds, [dirty] * rounds, [delay] * rounds, rate)


def overlap_on_grid(intervals, budget, horizon, step=0.001):
    """Sample the middle of each ``step``-wide cell and list cells over budget.

    ``intervals`` are (start, end, rate) half-open spans.
    """
    over = []
    cells = int(horizon / step) + 1
    for k in range(cells):
        t = (k + 0.5) * step
        rates = [rate for start, end, rate in intervals if start <= t < end]
        total = 0.0
        for r in sorted(rates):
            total += r
        over.append(total > budget * (1 + 1e-9))
    return over
