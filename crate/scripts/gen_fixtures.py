#!/usr/bin/env python3
"""Regenerate the bundled data fixtures.

Outputs (all deterministic for the fixed seeds below):
  data/bars_2200.csv                      2200 synthetic daily bars for SPY
  data/news_2200.jsonl                    news items for the same window
  data/news_scores.jsonl                  fixture-provider scores keyed by sha256(text)
  crates/core/tests/fixtures/walk80.csv   80-bar random walk for the indicator oracle
"""

import datetime as dt
import hashlib
import json
import math
import os
import random

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def weekdays(start, count):
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def random_walk(rng, n, start_price, drift, vol):
    bars = []
    prev_close = start_price
    for _ in range(n):
        o = round(prev_close * math.exp(rng.gauss(0.0, vol * 0.3)), 2)
        c = round(prev_close * math.exp(rng.gauss(drift, vol)), 2)
        hi = round(max(o, c) + abs(rng.gauss(0.0, vol * 0.4)) * max(o, c), 2)
        lo = round(min(o, c) - abs(rng.gauss(0.0, vol * 0.4)) * min(o, c), 2)
        hi = max(hi, o, c)
        lo = min(lo, o, c)
        v = int(rng.uniform(0.5, 1.5) * 80_000_000)
        bars.append((o, hi, lo, c, v))
        prev_close = c
    return bars


def write_bars(path, dates, bars):
    with open(path, "w", newline="\n") as f:
        f.write("date,open,high,low,close,volume\n")
        for d, (o, h, l, c, v) in zip(dates, bars):
            f.write(f"{d.isoformat()},{o:.2f},{h:.2f},{l:.2f},{c:.2f},{v}\n")


POSITIVE = [
    "profit surge beats estimates",
    "strong rally lifts outlook",
    "record gains on upbeat growth",
    "upgrade boosts confidence",
    "robust earnings beat forecasts",
]
NEGATIVE = [
    "losses deepen on weak demand",
    "shares plunge after downgrade",
    "recession fears hit outlook",
    "slump worsens as risks mount",
    "earnings miss sparks selloff",
]
NEUTRAL = [
    "markets await policy meeting",
    "index trades in narrow range",
    "investors review quarterly data",
]


def main():
    rng = random.Random(20150102)
    dates = weekdays(dt.date(2015, 1, 2), 2200)
    bars = random_walk(rng, 2200, 205.43, 0.0003, 0.011)
    write_bars(os.path.join(ROOT, "data", "bars_2200.csv"), dates, bars)

    closes = [b[3] for b in bars]
    horizon = 60
    news, scores = [], []
    k = 0
    for t, d in enumerate(dates):
        if rng.random() > 0.6:
            continue
        if t + horizon < len(closes):
            future_up = closes[t + horizon] > closes[t]
        else:
            future_up = rng.random() < 0.5
        for _ in range(rng.randint(1, 3)):
            k += 1
            roll = rng.random()
            if roll < 0.15:
                phrase = rng.choice(NEUTRAL)
                pos, neg = rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)
            else:
                bullish = future_up if roll < 0.75 else not future_up
                phrase = rng.choice(POSITIVE if bullish else NEGATIVE)
                strong, weak = rng.uniform(0.5, 0.9), rng.uniform(0.0, 0.1)
                pos, neg = (strong, weak) if bullish else (weak, strong)
            pos, neg = round(pos, 4), round(neg, 4)
            neu = round(1.0 - pos - neg, 4)
            # a few items land on weekends or after the close to exercise roll-forward
            day = d + dt.timedelta(days=rng.choice([0, 0, 0, 0, 0, 1]))
            ts = dt.datetime(day.year, day.month, day.day, rng.randint(0, 23), rng.randint(0, 59), tzinfo=dt.timezone.utc)
            text = f"SPY: {phrase} (wire {k:05d})"
            news.append({"timestamp": ts.isoformat().replace("+00:00", "Z"), "text": text, "symbol": "SPY"})
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            scores.append({"hash": digest, "positive": pos, "negative": neg, "neutral": neu})

    with open(os.path.join(ROOT, "data", "news_2200.jsonl"), "w", newline="\n") as f:
        for item in news:
            f.write(json.dumps(item) + "\n")
    with open(os.path.join(ROOT, "data", "news_scores.jsonl"), "w", newline="\n") as f:
        for s in scores:
            f.write(json.dumps(s) + "\n")

    rng80 = random.Random(80)
    dates80 = weekdays(dt.date(2020, 1, 2), 80)
    bars80 = random_walk(rng80, 80, 100.0, 0.0, 0.02)
    write_bars(os.path.join(ROOT, "crates", "core", "tests", "fixtures", "walk80.csv"), dates80, bars80)


if __name__ == "__main__":
    main()
