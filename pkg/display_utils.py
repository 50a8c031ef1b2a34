"""
Colored terminal reports for tracking runs and benchmarks
"""
import platform


def enable_windows_colors():
    """Enable ANSI color support in Windows terminal"""
    if platform.system() == "Windows":
        try:
            import ctypes
            kernel32 = ctypes.windll.kernel32
            kernel32.SetConsoleMode(kernel32.GetStdHandle(-11), 7)
            return True
        except (AttributeError, OSError):
            return False
    return True


def get_colors():
    """Get color codes with fallback for unsupported terminals"""
    if enable_windows_colors():
        return {
            'GOOD': '\033[92m',    # Green
            'BAD': '\033[91m',     # Red
            'WARN': '\033[93m',    # Yellow
            'RESET': '\033[0m',
            'BOLD': '\033[1m',
            'CYAN': '\033[96m',    # Headers
            'BLUE': '\033[94m',    # Borders
        }
    return {key: '' for key in ('GOOD', 'BAD', 'WARN', 'RESET', 'BOLD', 'CYAN', 'BLUE')}


def _rule(colors, width=60):
    return f"{colors['BLUE']}{'=' * width}{colors['RESET']}"


def display_track_summary(summary, tracks_path, fused_path):
    """Counters of a tracking run and where the results went"""
    colors = get_colors()
    print(f"\n{colors['CYAN']}{colors['BOLD']}TRACKING SUMMARY{colors['RESET']}")
    print(_rule(colors))
    rows = [
        ("CPIs processed", summary.cpis),
        ("Valid detections", summary.detections),
        ("Fused measurements", summary.fused),
        ("Outliers removed", summary.outliers_removed),
        ("CPIs skipped", summary.skipped),
        ("Measurements dropped", summary.dropped_measurements),
    ]
    for label, value in rows:
        print(f"{label:<24} {value}")

    tone = 'GOOD' if summary.confirmed_tracks else 'WARN'
    print(f"{'Confirmed tracks':<24} {colors[tone]}{summary.confirmed_tracks}{colors['RESET']}")
    if summary.errors:
        print(f"{'Errors':<24} {colors['BAD']}{len(summary.errors)}{colors['RESET']}")
    print(_rule(colors))
    print(f"Tracks: {tracks_path}")
    print(f"Fused:  {fused_path}")


def display_bench(stats, histogram=None, budget_ms=2.0):
    """Per-CPI latency percentiles and an optional text histogram"""
    colors = get_colors()
    print(f"\n{colors['CYAN']}{colors['BOLD']}PER-CPI LATENCY ({stats['count']} CPIs){colors['RESET']}")
    print(_rule(colors))
    for key in ("mean_ms", "p50_ms", "p98_ms", "max_ms"):
        value = stats[key]
        tone = 'GOOD' if value <= budget_ms else 'WARN'
        label = key.replace('_ms', '')
        print(f"{label:<6} {colors[tone]}{value:8.3f} ms{colors['RESET']}")

    if histogram is not None:
        counts, edges = histogram["counts"], histogram["edges_ms"]
        peak = max(int(counts.max()), 1)
        print(_rule(colors))
        for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
            bar = '#' * int(round(40 * count / peak))
            print(f"{lo:7.3f}-{hi:7.3f} ms | {bar} {count}")
    print(_rule(colors))


def display_paths(title, paths):
    colors = get_colors()
    print(f"\n{colors['CYAN']}{colors['BOLD']}{title}{colors['RESET']}")
    for path in paths:
        print(f"  {path}")
