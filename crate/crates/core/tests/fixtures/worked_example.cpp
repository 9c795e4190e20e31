#include<iostream>
#include<string>
using namespace std;
int main() {
int s=0, f=0;
string S, k="keyence";
cin>>S;
for(int i=0; i<S.length(); i++) {
if(S[i]==k[i]) s++;
else break;
}
for(int i=0; i<S.length(); i++) {
if(S[S.length()-1-i]==k[6-i]) f++;
else break;
}
if(s+f>=7) cout<<"YES"<<endl;
else cout<<"NO"<<endl;
return 0;
}
