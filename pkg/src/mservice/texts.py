"""Subscriber-facing message strings.

The service language is Swahili; staff-facing APIs stay English. Keeping
every string here makes the reply surface easy to review and keeps the
session renderer free of literals.
"""

CONSENT_NOTICE = "Huduma hii ni ya bure, utapokea tangazo la mdhamini."
CONSENT_PROCEED = "1. Endelea"
CONSENT_QUIT = "2. Ondoka"

FAREWELL = "Asante kwa kutumia huduma yetu."
REGISTER_FIRST = "Hujasajiliwa. Tuma {keyword} kwenda {shortcode} kujisajili."
INFO_WILL_BE_SENT = "Taarifa itatumwa kwenye simu yako kwa njia ya SMS."
INVALID_CHOICE = "Chaguo si sahihi."
SERVICE_EMPTY = "Samahani, hakuna taarifa kwenye huduma kwa sasa."
CATEGORY_EMPTY = "Hakuna taarifa katika kundi hili kwa sasa."

MORE_LABEL = "0. Zaidi"
BACK_LABEL = "9. Rudi"

NO_SPONSOR_PAID_HINT = ("Samahani, huduma ya bure haipatikani kwa sasa. "
                        "Kwa malipo ya {price} Tsh piga {dial}")
CONSENT_DENIED = "Huduma ya udhamini inahitaji ridhaa ya matangazo."

AD_CODE_SUFFIX = " - Tuma msimbo: {dial}"
CODE_UNKNOWN = "Msimbo si sahihi au umetumika."
CODE_EXPIRED = "Msimbo umeisha muda wake."
CONTENT_SENT = "Taarifa imetumwa kwa SMS. Asante."
PAID_CONFIRMED = "Malipo ya {price} Tsh yamepokelewa. Taarifa imetumwa kwa SMS."

WRONG_SERVICE = "Nambari ya huduma si sahihi."
SESSION_UNKNOWN = "Hakuna kikao kilicho wazi. Tafadhali anza upya."
SESSION_BUSY = "Kikao kingine kipo wazi. Subiri kiishe."
REQUEST_UNKNOWN = "Ombi halieleweki."

WELCOME_SMS = "Karibu! Umejiunga na huduma ya afya ya mama. Piga *{service}# kupata taarifa."
WELCOME_FEE_NOTE = " Ada ya usajili: {fee} Tsh."
ANSWER_PREFIX = "Jibu la swali lako: "
