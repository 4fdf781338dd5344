#!/usr/bin/env python3
"""Generate the synthetic corpus under data/fixtures/.

Output is a pure function of SEED, so rerunning reproduces the committed
files byte for byte.
"""
import json
import random
import re
from collections import Counter
from pathlib import Path

SEED = 20240611
OUT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

# (title, rating, clause). "{a|b}" picks one alternative per excerpt.
CLUSTERS = [
    [
        ("Your personal data is not sold", "good",
         "we {do not|never} sell your personal {data|information} to {anyone|third parties}"),
        ("Your personal data may be sold", "blocker",
         "we may sell your personal {data|information} to {advertisers|data brokers}"),
        ("Your data may be transferred in a merger or acquisition", "neutral",
         "if we are involved in a {merger|acquisition} your personal data may be transferred to the {buyer|new owner}"),
    ],
    [
        ("Third-party cookies are used for advertising", "bad",
         "{advertising partners|ad networks} place {third-party|tracking} cookies on your device to show you ads"),
        ("No third-party tracking cookies are used", "good",
         "we do not allow {third-party|external} tracking cookies on our {pages|site}"),
        ("Only necessary cookies are used", "good",
         "we use {only|just} the cookies that are strictly necessary to run the {site|service}"),
        ("You can opt out of tracking cookies", "good",
         "you can {refuse|disable} tracking cookies in your cookie settings at any time"),
    ],
    [
        ("You can delete your account and data", "good",
         "you can delete your account and {all|the} associated data from your {settings|profile page}"),
        ("Your data is kept after account deletion", "bad",
         "after you close your account we {keep|continue to store} your data"),
        ("Deleted content is removed within 30 days", "good",
         "content you delete is {erased|purged} from our systems within thirty days"),
        ("The service keeps backups of deleted content", "neutral",
         "copies of deleted content may {remain|persist} in our {backups|backup archives} for a period"),
    ],
    [
        ("The service notifies you of government requests", "good",
         "we {notify|tell} you when a government {agency|authority} requests your data"),
        ("Your data may be shared with authorities without notice", "bad",
         "we may disclose your data to {police|law enforcement} without {notifying|informing} you"),
        ("Government requests require a court order", "good",
         "we {require|insist on} a {court order|valid warrant} before handing over user data to authorities"),
    ],
    [
        ("Logs are deleted after a short period", "good",
         "server logs are {deleted|discarded} after {seven|fourteen} days"),
        ("Your data is retained indefinitely", "bad",
         "we {retain|keep} your information {indefinitely|for an unlimited time}"),
        ("Data is retained only as long as necessary", "good",
         "we keep personal data only {as long as|for as long as} it is needed for the purpose it was collected"),
        ("Retention periods are not stated", "neutral",
         "we store information for {varying|different} periods depending on {our needs|business needs}"),
    ],
    [
        ("Precise location is collected", "bad",
         "we collect the {precise|exact} {GPS|geographic} location of your device"),
        ("Location is collected only with consent", "good",
         "we access your location only {after|if} you {grant|give} permission"),
        ("Location is not collected", "good",
         "we do not {collect|track} your location"),
        ("Approximate location is derived from your IP address", "neutral",
         "we infer your approximate {city|region} from your IP address"),
        ("Location is shared with partners", "blocker",
         "we share your location {history|data} with {partners|business partners}"),
    ],
    [
        ("Your data is encrypted in transit", "good",
         "all data sent between your device and our servers is encrypted {using TLS|with HTTPS}"),
        ("Your data is not encrypted", "bad",
         "information you send us is {stored|transmitted} without encryption"),
    ],
    [
        ("You can opt out of targeted advertising", "good",
         "you can {opt out of|turn off} personalized ads in your {ad settings|privacy settings}"),
        ("You cannot opt out of targeted advertising", "bad",
         "personalized ads are {part of the service|always on} and cannot be {disabled|turned off}"),
    ],
    [
        ("The service does not knowingly collect data from children", "good",
         "we do not knowingly collect personal information from children under {13|16}"),
        ("The service collects data from children", "blocker",
         "we collect {data|information} from {minors|children} who use the service"),
    ],
    [
        ("You are notified of policy changes", "good",
         "we will {notify|email} you before any material change to this policy takes effect"),
        ("Policy can change without notice", "bad",
         "we may {update|change} this policy at any time without {notice|notifying you}"),
    ],
    [
        ("You can request a copy of your data", "good",
         "you can {request|download} a copy of the personal data we hold about you"),
        ("You cannot access the data held about you", "bad",
         "we do not provide users with access to the {data|records} we hold about them"),
    ],
    [
        ("Data is anonymized before sharing", "good",
         "we {anonymize|aggregate} data before sharing it so it cannot identify you"),
        ("Identifiable data is shared with partners", "blocker",
         "we share data that {identifies|can identify} you with {partners|affiliated partners}"),
    ],
    [
        ("Social login data is limited to basic profile", "good",
         "when you sign in with a social account we receive only your {name|basic profile} and email"),
        ("Social login grants access to your contacts", "bad",
         "signing in with a social account {gives|grants} us access to your friends list and contacts"),
    ],
    [
        ("Marketing emails require opt-in", "good",
         "we send marketing {emails|newsletters} only if you opt in"),
        ("You are enrolled in marketing emails by default", "bad",
         "you are {subscribed|enrolled} to marketing {emails|newsletters} by default"),
    ],
    [
        ("Biometric data is not collected", "good",
         "we do not collect {biometric|facial recognition} data"),
        ("Biometric data is collected", "blocker",
         "we collect biometric identifiers such as {face geometry|fingerprints}"),
    ],
    [
        ("Data stays in your region", "good",
         "your data is stored on servers located in your {region|country}"),
        ("Data is transferred to other countries", "neutral",
         "your information may be transferred to and processed in other {countries|jurisdictions}"),
    ],
    [
        ("You are notified of data breaches", "good",
         "we will notify affected users {promptly|without delay} if a data breach occurs"),
        ("Breach notification is not promised", "neutral",
         "we cannot guarantee that we will inform you of {security incidents|breaches}"),
    ],
    [
        ("You can use the service without a real name", "good",
         "you can use a {pseudonym|nickname} instead of your real name"),
        ("A real name is required", "neutral",
         "you must register with your {real|legal} name"),
    ],
    [
        ("No third-party analytics are used", "good",
         "we do not use {third-party|external} analytics tools"),
        ("Third-party analytics track your usage", "bad",
         "we use {third-party|external} analytics providers that track how you use the service"),
    ],
    [
        ("Automated decisions can be contested", "good",
         "you can ask for human review of any {automated|algorithmic} decision about you"),
        ("Automated profiling affects your account", "bad",
         "we use automated profiling to make decisions that affect your {account|eligibility}"),
    ],
    [
        ("Contacts are uploaded only with permission", "good",
         "we upload your address book only {when|if} you allow it"),
        ("Your contacts are uploaded automatically", "bad",
         "the app {automatically uploads|syncs} your address book to our servers"),
        ("Contacts are not accessed", "good",
         "we never access the {contacts|address book} on your device"),
    ],
    [
        ("Do Not Track signals are honored", "good",
         "we {honor|respect} Do Not Track signals sent by your browser"),
        ("Do Not Track signals are ignored", "neutral",
         "we do not {respond to|honor} Do Not Track signals"),
        ("Global Privacy Control is honored", "good",
         "we treat a Global Privacy Control signal as a {valid|binding} opt out"),
    ],
    [
        ("Data is shared only with service providers", "good",
         "we share data only with service providers who {process|handle} it on our behalf"),
        ("Data is shared with third parties for their own marketing", "blocker",
         "we share your data with third parties who use it for their own {marketing|advertising}"),
        ("The list of third parties is published", "good",
         "we publish a {list|complete list} of the third parties we work with"),
    ],
    [
        ("Private messages are end-to-end encrypted", "good",
         "private messages are end-to-end encrypted so {only you and the recipient|no one else} can read them"),
        ("Private messages may be scanned", "bad",
         "we may {scan|analyze} the content of your private messages"),
        ("Staff can read private messages", "bad",
         "our {staff|employees} can read your private messages"),
    ],
]

STANDALONE = [
    ("The service provides a clear privacy contact", "good",
     "you can reach our privacy team at a dedicated {contact address|email address}"),
    ("A data protection officer is appointed", "good",
     "we have appointed a data protection officer who {oversees|supervises} our compliance"),
    ("The policy is written in plain language", "good",
     "we wrote this policy in {plain|simple} language so it is easy to understand"),
    ("Security audits are performed regularly", "good",
     "independent {auditors|experts} review our security {practices|controls} every year"),
    ("Two-factor authentication is available", "good",
     "you can {enable|turn on} two-factor authentication for your account"),
    ("Passwords are stored hashed", "good",
     "we store your password only as a {salted hash|hashed value}"),
    ("You can export your data in a portable format", "good",
     "you can export your data in a {portable|machine-readable} format"),
    ("You can correct inaccurate personal data", "good",
     "you can {correct|update} inaccurate personal data in your profile"),
    ("The service minimizes the data it collects", "good",
     "we collect only the {minimum|least amount of} data required to provide the service"),
    ("Payment details are handled by a certified processor", "good",
     "card numbers are handled by a {certified|PCI compliant} payment processor and never stored by us"),
    ("Employees receive privacy training", "good",
     "our employees complete privacy training {every year|annually}"),
    ("Access to your data is restricted to authorized staff", "good",
     "only {authorized|designated} staff can access your personal data"),
    ("A transparency report is published", "good",
     "we publish a transparency report {twice a year|every year}"),
    ("You can withdraw consent at any time", "good",
     "you may withdraw your consent at any time {without penalty|free of charge}"),
    ("You can object to processing for direct marketing", "good",
     "you have the right to object to processing for direct {marketing|promotion}"),
    ("Users are informed before data collection", "good",
     "we {inform|tell} you what we collect before we collect it"),
    ("Older policy versions are archived", "good",
     "previous versions of this policy are {archived|kept} and available for review"),
    ("The service supports browsing without an account", "good",
     "you can browse {listings|content} without creating an account"),
    ("Search history can be paused", "good",
     "you can {pause|stop} the saving of your search history"),
    ("Voice recordings are not stored", "good",
     "voice commands are processed on the fly and recordings are not {stored|saved}"),
    ("Photos are stripped of location metadata", "good",
     "we remove location metadata from photos you {upload|share}"),
    ("Message history can be deleted by the user", "good",
     "you can {clear|delete} your message history whenever you want"),
    ("The service offers an ad-free option", "good",
     "a {paid|premium} plan lets you use the service without ads"),
    ("No fingerprinting techniques are used", "good",
     "we do not use browser fingerprinting to {identify|recognize} you"),
    ("You can lodge a complaint with a supervisory authority", "good",
     "you may lodge a complaint with your local {supervisory|data protection} authority"),
    ("Inactive accounts are deleted automatically", "good",
     "accounts that stay inactive for two years are {deleted|removed} automatically"),
    ("Partners are bound by confidentiality agreements", "good",
     "our partners are bound by {strict|written} confidentiality agreements"),
    ("Health information is never used for advertising", "good",
     "we never use health information to {target|personalize} advertising"),
    ("Your profile is private by default", "good",
     "new profiles are {private|hidden} by default"),
    ("You can choose who sees your activity", "good",
     "you decide {who|which people} can see your activity"),

    ("The service reads device identifiers", "bad",
     "we read {device identifiers|advertising identifiers} from your phone"),
    ("Your browsing history is collected", "bad",
     "we collect the {websites|pages} you visit while using our browser extension"),
    ("Your data is used to train models", "bad",
     "we use your content to train our machine learning {models|systems}"),
    ("The service combines data from other sources", "bad",
     "we combine information about you with data obtained from {other sources|data vendors}"),
    ("Your profile is public by default", "bad",
     "your profile is {public|visible to everyone} unless you change it"),
    ("The service tracks you on other websites", "bad",
     "we {track|follow} your activity across other websites and apps"),
    ("Your purchase history is shared with advertisers", "bad",
     "we share your purchase history with {advertisers|marketing partners}"),
    ("Your financial information is collected", "bad",
     "we collect financial information such as your {bank account|income}"),
    ("Your phone number is used for advertising", "bad",
     "the phone number you provide for security may be used for {advertising|ad targeting}"),
    ("The service collects information about your social connections", "bad",
     "we collect information about the people you {interact with|connect with}"),
    ("Your data is used for purposes beyond the service", "bad",
     "we may use your information for purposes {unrelated|beyond those related} to the service"),
    ("Your content is licensed broadly to the service", "bad",
     "you grant us a worldwide {royalty-free|perpetual} license to use your content"),
    ("The service monitors your keystrokes", "bad",
     "we record {keystrokes|mouse movements} to analyze your sessions"),
    ("Your microphone may be accessed in the background", "bad",
     "the app may access your microphone while running in the {background|foreground}"),
    ("Your usage data is kept for research", "bad",
     "we keep your usage data for {research|internal studies}"),
    ("The service may contact you via third parties", "bad",
     "we may contact you through {third-party|partner} platforms"),
    ("Your account can be suspended without explanation", "bad",
     "we may suspend your account without {explanation|giving a reason}"),
    ("You must waive your right to a class action", "bad",
     "you {waive|give up} your right to participate in a class action"),
    ("The service uses web beacons in emails", "bad",
     "our emails contain web beacons that report when you {open|read} them"),

    ("The service uses session cookies", "neutral",
     "we use session cookies that {expire|are deleted} when you close your browser"),
    ("Server logs record your IP address", "neutral",
     "our servers log your IP address when you {visit|access} the site"),
    ("The service uses a content delivery network", "neutral",
     "we use a content delivery network to {serve|deliver} pages faster"),
    ("Customer support calls may be recorded", "neutral",
     "calls with customer support may be recorded for {quality|training} purposes"),
    ("The service uses your language settings", "neutral",
     "we use your {language|locale} settings to show content in your language"),
    ("Information is collected about your device type", "neutral",
     "we collect your device {type|model} and operating system version"),
    ("The service sends transactional emails", "neutral",
     "we send emails about your {bookings|transactions} and account"),
    ("Crash reports are collected", "neutral",
     "the app sends crash reports to help us {fix bugs|improve stability}"),
    ("The service verifies your identity", "neutral",
     "we may ask you to {verify|confirm} your identity with an official document"),
    ("Reviews you write are public", "neutral",
     "reviews you write are {public|visible} to other users"),
    ("The service uses payment processors", "neutral",
     "payments are processed by {third-party|external} payment processors"),
    ("Your time zone is recorded", "neutral",
     "we record your time zone to {schedule|display} events correctly"),
    ("The policy applies to affiliated companies", "neutral",
     "this policy also applies to our {affiliated|related} companies"),
    ("Surveys are optional", "neutral",
     "participation in our surveys is {optional|voluntary}"),
    ("The service stores your preferences", "neutral",
     "we store your {preferences|settings} so you do not have to set them again"),
    ("Disputes are governed by the law of a specific country", "neutral",
     "disputes are governed by the laws of {Ireland|the state of California}"),
    ("The service uses hosting providers", "neutral",
     "our service is hosted by {cloud|external} hosting providers"),

    ("The service can read your private files", "blocker",
     "we may {read|access} the private files stored on your device"),
]

INTROS = ["", "Please note that", "In addition,", "To operate the service,", "As described below,",
          "For clarity,", "Where applicable,", "In general,"]
CONTEXTS = ["", "when you use our services", "as permitted by applicable law",
            "in accordance with this policy", "for the purposes described in this section",
            "on our website and mobile apps"]
SERVICES = [f"svc{i:02d}" for i in range(40)]

HOST_INTROS = ["", "When you book a stay,", "If you are a host,", "When you list a space,",
               "For guests and hosts alike,", "When you contact another member,",
               "If you use our mobile app,", "During the booking process,"]
TITLES = [
    "Privacy Policy", "Information We Collect", "Information You Give Us",
    "Information We Collect Automatically", "Information From Third Parties",
    "How We Use Information", "Providing Our Platform", "Personalizing Your Experience",
    "Sharing and Disclosure", "Sharing With Hosts and Guests", "Service Providers",
    "Legal Requirements", "Your Rights", "Managing Your Information",
    "Data Retention", "Security", "International Transfers", "Cookies and Similar Technologies",
    "Children", "Contact Us",
]


def expand(template, rng):
    return re.sub(r"\{([^{}]*)\}", lambda m: rng.choice(m.group(1).split("|")), template)


def sentence(parts):
    s = " ".join(p for p in parts if p)
    return s[0].upper() + s[1:] + "."


def main():
    rng = random.Random(SEED)
    cases, clusters = [], []
    n = 0
    for k, members in enumerate(CLUSTERS, 1):
        ids = []
        for title, rating, clause in members:
            n += 1
            cid = f"c{n:03d}"
            ids.append(cid)
            cases.append({"id": cid, "title": title, "rating": rating, "_clause": clause})
        clusters.append({"cluster_id": f"k{k:02d}", "case_ids": ids})
    for title, rating, clause in STANDALONE:
        n += 1
        cases.append({"id": f"c{n:03d}", "title": title, "rating": rating, "_clause": clause})

    ratings = Counter(c["rating"] for c in cases)
    assert len(cases) == 130, len(cases)
    assert ratings == {"good": 63, "bad": 35, "neutral": 25, "blocker": 7}, ratings
    assert len(clusters) == 24
    assert sum(len(c["case_ids"]) for c in clusters) == 63
    assert all(2 <= len(c["case_ids"]) <= 6 for c in clusters)
    assert len({c["title"] for c in cases}) == 130

    lines = []
    for c in cases:
        for _ in range(rng.randint(4, 10)):
            text = sentence([rng.choice(INTROS), expand(c["_clause"], rng), rng.choice(CONTEXTS)])
            rec = {"case_id": c["id"], "service_id": rng.choice(SERVICES), "excerpt": text,
                   "approved": rng.random() > 0.03}
            lines.append(json.dumps(rec, ensure_ascii=False))

    # Case study: 20 heading lines and 130 content lines with 10/85/35
    # lines expressing one/two/three cases, i.e. 285 gold cells.
    counts = [1] * 10 + [2] * 85 + [3] * 35
    rng.shuffle(counts)
    content, gold = [], []
    for k in counts:
        chosen = rng.sample(range(len(cases)), k)
        text = " ".join(
            sentence([rng.choice(HOST_INTROS), expand(cases[i]["_clause"], rng)]) for i in chosen)
        content.append((text, sorted(cases[i]["id"] for i in chosen)))
    per_title = [len(content) // len(TITLES)] * len(TITLES)
    for i in range(len(content) - sum(per_title)):
        per_title[i] += 1
    policy, tags, it = [], [], iter(content)
    for title, m in zip(TITLES, per_title):
        policy.append(title)
        policy.append("")
        for _ in range(m):
            text, ids = next(it)
            tags.append({"segment_index": len([p for p in policy if p]), "case_ids": ids})
            policy.append(text)
            policy.append("")
    assert len([p for p in policy if p]) == 150
    assert sum(len(t["case_ids"]) for t in tags) == 285

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "case_study").mkdir(exist_ok=True)
    catalog = [{k: v for k, v in c.items() if not k.startswith("_")} for c in cases]
    (OUT / "cases.json").write_text(json.dumps(catalog, indent=2, ensure_ascii=False) + "\n")
    (OUT / "clusters.json").write_text(json.dumps(clusters, indent=2) + "\n")
    (OUT / "annotations.jsonl").write_text("\n".join(lines) + "\n")
    (OUT / "case_study" / "policy.txt").write_text("\n".join(policy))
    (OUT / "case_study" / "gold_tags.json").write_text(
        json.dumps({"service": "homeshare", "tags": tags}, indent=2) + "\n")


if __name__ == "__main__":
    main()
