#!/usr/bin/env python3
"""Generate the reference simnet scenario.

The network has 98 reachable channels and 120 offer-posting accounts, 53 of which accept
direct messages and carry a scripted persona:

  30 pay out (rounds to disclosure 1:4, 2:8, 3:8, 4:6, 5:4), 62 disclosures in total
  15 never answer
   8 answer for a few rounds and then go quiet

Everything is derived from a fixed RNG seed, so rerunning the script rewrites the same file.

    python3 scripts/gen_scenario.py > scenarios/reference_network.json
"""

import hashlib
import json
import random
import sys

SEED = 20250611
rng = random.Random(SEED)

B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def digest(tag: str) -> bytes:
    return hashlib.sha256(tag.encode()).digest()


def tron_address(tag: str) -> str:
    d = digest(tag)
    return "T" + "".join(B58[b % 58] for b in (d + d)[:33])


def hex_address(tag: str) -> str:
    return "0x" + digest(tag).hex()[:40]


# ---- channels ----

NAMES = ["vchat", "night_line", "yiduiyi", "private_room", "moonlight", "lounge", "club", "cam_zone", "sweet_talk",
         "after_dark"]


def handle(i: int) -> str:
    return f"{NAMES[i % len(NAMES)]}_{i:03d}"


N_CHANNELS = 98
DEPTH0_VIDEO = range(0, 30)      # directory: "video chat"
DEPTH0_YIDUIYI = range(30, 40)   # directory: "一对一"
DEPTH0_PRIVATE = range(40, 45)   # directory: "private chat" (reached only through synonym expansion)
DEPTH1 = range(45, 75)
DEPTH2 = range(75, 92)
DEPTH3 = range(92, 98)

directory = {
    "video chat": [handle(i) for i in DEPTH0_VIDEO],
    "一对一": [handle(i) for i in DEPTH0_YIDUIYI] + [handle(5)],  # one overlap with the other query
    "private chat": [handle(i) for i in DEPTH0_PRIVATE],
    # Unused keyword so queries outside the seed set return something unrelated.
    "crypto signals": ["signals_room"],
}

links = {i: [] for i in range(N_CHANNELS)}
depth0 = list(DEPTH0_VIDEO) + list(DEPTH0_YIDUIYI) + list(DEPTH0_PRIVATE)
for n, target in enumerate(DEPTH1):
    links[depth0[n % len(depth0)]].append(handle(target))
for n, target in enumerate(DEPTH2):
    links[DEPTH1[n % len(DEPTH1)]].append(handle(target))
for n, target in enumerate(DEPTH3):
    links[DEPTH2[n % len(DEPTH2)]].append(handle(target))
# Some back-links that must not be double counted.
links[DEPTH3[0]].append(handle(0))
links[DEPTH2[3]].append(handle(46))

EXTRA_DEEP = "deep_vip_lounge"       # depth 4: beyond the crawl cap
REJECTED = "members_only_vip"        # join request refused
GONE = "deleted_room_404"            # no such channel
links[DEPTH3[-1]].append(EXTRA_DEEP)
links[10].append(REJECTED)
links[20].append(GONE)

OFFERS = [
    "一对一视频聊天，真人在线，私信我",
    "video chat tonight, DM me for details",
    "pay to chat, fast reply, serious buyers only",
    "视频聊天 可以私人定制，私聊",
    "一对一 真人 不骗人 私信",
    "private video chat sessions, message me",
    "私人定制服务 私聊了解",
]
CHATTER = ["anyone online?", "晚上好", "good evening all", "新人报到", "what's the best time to ask?", "哈哈"]

# ---- actors ----

N_ACTORS = 120
actor_ids = [f"seller_{i:03d}" for i in range(N_ACTORS)]

channel_posts = {i: [] for i in range(N_CHANNELS)}
for i, actor in enumerate(actor_ids):
    homes = [i % N_CHANNELS]
    if i < 40:
        homes.append((i * 7 + 3) % N_CHANNELS)
    for h in homes:
        channel_posts[h].append({"text": OFFERS[(i + h) % len(OFFERS)], "sender": actor})


def link_text(target: str, n: int) -> str:
    return f"partner group: @{target}" if n % 2 == 0 else f"backup channel https://t.me/{target}"


channels = []
for i in range(N_CHANNELS):
    messages = []
    for n, target in enumerate(links[i]):
        messages.append({"text": link_text(target, n), "sender": f"admin_{i:03d}"})
    posts = channel_posts[i]
    for n, post in enumerate(posts):
        messages.append({"text": CHATTER[(i + n) % len(CHATTER)], "sender": f"member_{(i * 3 + n) % 50:02d}"})
        messages.append(post)
    channels.append({
        "handle": handle(i),
        "title": f"{NAMES[i % len(NAMES)].replace('_', ' ').title()} {i}",
        "pinned": [{"text": "Rules: ask about the service and price in private, no spam", "sender": f"admin_{i:03d}"}],
        "filler": {"count": 5 + i % 7, "text": "daily check-in", "sender": f"member_{i % 50:02d}"},
        "messages": messages,
    })

channels.append({
    "handle": EXTRA_DEEP,
    "title": "Deep VIP Lounge",
    "pinned": [{"text": "VIP service only", "sender": "admin_deep"}],
    "messages": [{"text": "一对一视频聊天 VIP", "sender": "seller_deep"}],
})
channels.append({
    "handle": REJECTED,
    "title": "Members only",
    "join_rejected": True,
    "messages": [{"text": "video chat for members", "sender": "seller_members"}],
})
channels.append({
    "handle": "signals_room",
    "title": "Signals",
    "messages": [{"text": "BTC long here", "sender": "signal_bot"}],
})

# ---- personas ----

SUCCESS_ROUNDS = [1] * 4 + [2] * 8 + [3] * 8 + [4] * 6 + [5] * 4
DISENGAGE_ROUNDS = [1, 1, 2, 2, 3, 3, 4, 5]

METHODS = ["AlipayImage"] * 16 + ["USDT"] * 15 + ["WeChat"] * 14 + ["Alipay"] * 12 + ["QQImage"] * 3 + ["Bank"] + [
    "PaymentSolution"]
assert len(METHODS) == 62
# Image-carried USDT and WeChat disclosures, so images account for 26 of the 62.
IMAGE_USDT = 4
IMAGE_WECHAT = 3

# Quotes as (minutes, CNY); the [30, 34] bin spans 250 to 620.
QUOTES = [(10, 100), (10, 120), (10, 150), (10, 200), (15, 200), (15, 260), (15, 300), (20, 200), (20, 260),
          (20, 300), (20, 350), (25, 300), (30, 250), (30, 300), (30, 400), (30, 500), (32, 600), (34, 620),
          (35, 400), (35, 450), (35, 500), (40, 580), (40, 620), (40, 650), (40, 680), (45, 500), (50, 550),
          (60, 680)]


def quote_text(minutes: int, price: int) -> str:
    if minutes == 60:
        return f"1小时 {price}元"
    return rng.choice([f"{minutes}分钟 {price}元", f"{minutes} min {price} rmb", f"{price}元/{minutes}分钟"])


eligible = sorted(rng.sample(range(N_ACTORS), 53))
roles = ["success"] * 30 + ["ghost"] * 15 + ["disengager"] * 8
rng.shuffle(roles)

success_slots = list(range(30))
rng.shuffle(success_slots)
success_rounds = SUCCESS_ROUNDS[:]
rng.shuffle(success_rounds)

# Disclosure k and k+30 (and k+60 for k < 2) go to success persona k.
disclosures_for = {k: [METHODS[k], METHODS[k + 30]] + ([METHODS[k + 60]] if k + 60 < 62 else []) for k in range(30)}
usdt_seen = 0
wechat_seen = 0


def disclosure_message(owner: str, method: str, n: int) -> dict:
    global usdt_seen, wechat_seen
    tag = f"{owner}/{n}"
    if method == "AlipayImage":
        return {"text": "扫码付款", "media": [{"kind": "Image", "payload": f"https://qr.alipay.com/fkx{digest(tag).hex()[:12]}"}]}
    if method == "QQImage":
        return {"text": "QQ钱包扫这个", "media": [{"kind": "Image", "payload": f"https://qianbao.qq.com/pay/{digest(tag).hex()[:10]}"}]}
    if method == "USDT":
        usdt_seen += 1
        addr = tron_address(tag) if usdt_seen % 3 else hex_address(tag)
        if usdt_seen <= IMAGE_USDT:
            return {"text": "地址在图里", "media": [{"kind": "Image", "payload": f"USDT TRC20\n{addr}"}]}
        return {"text": f"USDT only. address {addr}"}
    if method == "WeChat":
        wechat_seen += 1
        if wechat_seen <= IMAGE_WECHAT:
            return {"text": "加我", "media": [{"kind": "Image", "payload": f"wxp://f2f0{digest(tag).hex()[:14]}"}]}
        return {"text": f"微信号：wx_{owner[-3:]}{n}"}
    if method == "Alipay":
        return {"text": f"支付宝：1{int.from_bytes(digest(tag)[:5], 'big') % 10**10:010d}"}
    if method == "Bank":
        return {"text": f"银行卡：6222{int.from_bytes(digest(tag)[:6], 'big') % 10**12:012d}"}
    if method == "PaymentSolution":
        return {"text": "下载 Mugua 视频 APP，支付链接：https://pay.mugua.example/recharge/77"}
    raise ValueError(method)


def photos(kind: str, owner: str) -> list:
    if kind == "SlowPlatform":
        return [{"kind": "Image", "person_labels": [f"{owner}_girl_a"], "payload": "photo a"},
                {"kind": "Image", "person_labels": [f"{owner}_girl_b", f"{owner}_girl_c"], "payload": "photo b"}]
    return [{"kind": "Image", "person_labels": [f"{owner}_self"], "payload": "selfie"}]


FILLER_STEPS = ["你好，在的", "what kind of chat do you want?", "可以的，随时都行", "ok wait a moment", "好的"]

actors = []
quote_pool = QUOTES[:]
rng.shuffle(quote_pool)
success_index = 0
disengage_index = 0
refusal_persona_done = False
upseller_done = False

for i, actor in enumerate(actor_ids):
    entry = {"actor_id": actor}
    if i not in eligible:
        entry["dm_open"] = False
        actors.append(entry)
        continue
    role = roles[eligible.index(i)]
    if role == "ghost":
        entry["persona"] = {"kind": "Ghost"}
    elif role == "disengager":
        rounds = DISENGAGE_ROUNDS[disengage_index]
        disengage_index += 1
        script = []
        for r in range(rounds):
            msgs = [{"text": FILLER_STEPS[r % len(FILLER_STEPS)]}]
            if r == 0 and quote_pool:
                m, p = quote_pool.pop()
                msgs.append({"text": "价格 " + quote_text(m, p), "offset": 2})
            script.append(msgs)
        entry["persona"] = {"kind": "Disengager", "disengage_after": rounds, "script": script}
    else:
        k = success_slots[success_index]
        rounds = success_rounds[success_index]
        success_index += 1
        if not upseller_done and rounds >= 2 and "AlipayImage" in disclosures_for[k]:
            kind = "Upseller"
            upseller_done = True
        else:
            kind = "SlowPlatform" if rng.random() < 0.4 else "FastIndividual"
        script = []
        for r in range(rounds):
            msgs = []
            if r == 0:
                text = "你好 " + ("we have several girls" if kind == "SlowPlatform" else "it's me in the photo")
                if kind == "FastIndividual" and not refusal_persona_done and rounds >= 2:
                    # The seller's wording trips the simulated model's refusal; the softening table repairs it.
                    text = "裸聊 " + text
                    refusal_persona_done = True
                msgs.append({"text": text, "media": photos("SlowPlatform" if kind == "SlowPlatform" else "FastIndividual", actor)})
                if quote_pool:
                    m, p = quote_pool.pop()
                    msgs.append({"text": quote_text(m, p), "offset": 2})
            if kind == "Upseller" and 0 < r < rounds - 1:
                msgs.append({"text": "VIP 套餐更划算，要不要升级？"})
            if r == rounds - 1:
                # One message carries every method: the session ends on the first disclosure, so later
                # messages in the burst would never be read.
                parts = [disclosure_message(actor, method, n) for n, method in enumerate(disclosures_for[k])]
                msgs.append({"text": "\n".join(p["text"] for p in parts),
                             "media": [m for p in parts for m in p.get("media", [])]})
            elif not msgs:
                msgs.append({"text": FILLER_STEPS[r % len(FILLER_STEPS)]})
            script.append(msgs)
        entry["persona"] = {"kind": kind, "script": script}
    actors.append(entry)

assert success_index == 30 and disengage_index == 8 and upseller_done and refusal_persona_done

scenario = {
    "seed": SEED,
    "start_time": 1717200000000,
    "directory": directory,
    "channels": channels,
    "actors": actors,
}
json.dump(scenario, sys.stdout, ensure_ascii=False, indent=1)
sys.stdout.write("\n")
